//! Knowledge states: the structural and parametric scales, the temporal flag,
//! and the relaxation order that decides whether one state can stand in for
//! another.
//!
//! Ordering is decided by tags alone. Payloads (independence sets, graphs,
//! equations) ride along for validation and are compared only at equal tags.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Dag, IndependenceSet, Pdag};
use crate::scm::Scm;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("temporal flags differ ({0} vs {1})")]
    TemporalMismatch(TemporalFlag, TemporalFlag),
    #[error("conflicting {0} payloads at equal tags")]
    PayloadConflict(Axis),
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("cannot parse knowledge state {0:?}; expected structural:parametric:temporal")]
    Parse(String),
}

/// One of the three independent axes of a knowledge state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Structural,
    Parametric,
    Temporal,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Structural => "structural",
            Axis::Parametric => "parametric",
            Axis::Temporal => "temporal",
        })
    }
}

macro_rules! tag_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = LatticeError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(LatticeError::Parse(s.to_string())),
                }
            }
        }
    };
}

tag_enum! {
    /// Unknown < Plausible < Causal.
    StructuralTag {
        Unknown => "unknown",
        Plausible => "plausible",
        Causal => "causal",
    }
}

tag_enum! {
    /// NonParametric < NoiseModel < Parametric < FullyKnown.
    ParametricTag {
        NonParametric => "nonparametric",
        NoiseModel => "noise_model",
        Parametric => "parametric",
        FullyKnown => "fully_known",
    }
}

tag_enum! {
    /// Not ordered: static and temporal knowledge never substitute for each other.
    TemporalFlag {
        Static => "static",
        Temporal => "temporal",
    }
}

/// Payload of the Plausible level: the independence statements that define
/// the candidate class, optionally with a PDAG summarising it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlausibleKnowledge {
    independencies: IndependenceSet,
    pdag: Option<Pdag>,
}

impl PlausibleKnowledge {
    pub fn new(independencies: IndependenceSet, pdag: Option<Pdag>) -> Result<Self, LatticeError> {
        if independencies.is_empty() && pdag.is_none() {
            return Err(LatticeError::InvalidPayload(
                "plausible knowledge needs independence statements or a PDAG".into(),
            ));
        }
        Ok(PlausibleKnowledge {
            independencies,
            pdag,
        })
    }

    pub fn independencies(&self) -> &IndependenceSet {
        &self.independencies
    }

    pub fn pdag(&self) -> Option<&Pdag> {
        self.pdag.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StructuralLevel {
    Unknown,
    Plausible(Option<Arc<PlausibleKnowledge>>),
    Causal(Option<Arc<Dag>>),
}

impl StructuralLevel {
    pub fn tag(&self) -> StructuralTag {
        match self {
            StructuralLevel::Unknown => StructuralTag::Unknown,
            StructuralLevel::Plausible(_) => StructuralTag::Plausible,
            StructuralLevel::Causal(_) => StructuralTag::Causal,
        }
    }

    pub fn from_tag(tag: StructuralTag) -> Self {
        match tag {
            StructuralTag::Unknown => StructuralLevel::Unknown,
            StructuralTag::Plausible => StructuralLevel::Plausible(None),
            StructuralTag::Causal => StructuralLevel::Causal(None),
        }
    }

    pub fn causal(g: Dag) -> Self {
        StructuralLevel::Causal(Some(Arc::new(g)))
    }

    pub fn plausible(k: PlausibleKnowledge) -> Self {
        StructuralLevel::Plausible(Some(Arc::new(k)))
    }

    pub fn has_payload(&self) -> bool {
        !matches!(
            self,
            StructuralLevel::Unknown | StructuralLevel::Plausible(None) | StructuralLevel::Causal(None)
        )
    }

    pub fn dag(&self) -> Option<&Dag> {
        match self {
            StructuralLevel::Causal(Some(g)) => Some(g),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Normal,
    Uniform,
}

/// Additive noise `X = g(Pa(X)) + U`, optionally with a known family for `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct NoiseForm {
    pub family: Option<NoiseFamily>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionClass {
    Linear,
    Polynomial(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParametricLevel {
    NonParametric,
    NoiseModel(Option<NoiseForm>),
    Parametric(Option<FunctionClass>),
    FullyKnown(Option<Arc<Scm>>),
}

impl ParametricLevel {
    pub fn tag(&self) -> ParametricTag {
        match self {
            ParametricLevel::NonParametric => ParametricTag::NonParametric,
            ParametricLevel::NoiseModel(_) => ParametricTag::NoiseModel,
            ParametricLevel::Parametric(_) => ParametricTag::Parametric,
            ParametricLevel::FullyKnown(_) => ParametricTag::FullyKnown,
        }
    }

    pub fn from_tag(tag: ParametricTag) -> Self {
        match tag {
            ParametricTag::NonParametric => ParametricLevel::NonParametric,
            ParametricTag::NoiseModel => ParametricLevel::NoiseModel(None),
            ParametricTag::Parametric => ParametricLevel::Parametric(None),
            ParametricTag::FullyKnown => ParametricLevel::FullyKnown(None),
        }
    }

    /// A complete equation set. The SCM type already guarantees that every
    /// node has an equation or a noise spec.
    pub fn fully_known(equations: Scm) -> Self {
        ParametricLevel::FullyKnown(Some(Arc::new(equations)))
    }

    pub fn has_payload(&self) -> bool {
        matches!(
            self,
            ParametricLevel::NoiseModel(Some(_))
                | ParametricLevel::Parametric(Some(_))
                | ParametricLevel::FullyKnown(Some(_))
        )
    }

    pub fn equations(&self) -> Option<&Scm> {
        match self {
            ParametricLevel::FullyKnown(Some(m)) => Some(m),
            _ => None,
        }
    }
}

pub fn leq_structural(a: &StructuralLevel, b: &StructuralLevel) -> bool {
    a.tag() <= b.tag()
}

pub fn leq_parametric(a: &ParametricLevel, b: &ParametricLevel) -> bool {
    a.tag() <= b.tag()
}

/// A point on the combined grid. Construct through [`KnowledgeState::new`]
/// so the payload invariants are checked.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeState {
    structural: StructuralLevel,
    parametric: ParametricLevel,
    temporal: TemporalFlag,
}

impl KnowledgeState {
    pub fn new(
        structural: StructuralLevel,
        parametric: ParametricLevel,
        temporal: TemporalFlag,
    ) -> Result<Self, LatticeError> {
        if let (Some(g), Some(m)) = (structural.dag(), parametric.equations()) {
            if g != m.graph() {
                return Err(LatticeError::InvalidPayload(
                    "equation parents do not match the causal graph".into(),
                ));
            }
        }
        Ok(KnowledgeState {
            structural,
            parametric,
            temporal,
        })
    }

    /// A state with no payloads.
    pub fn from_tags(s: StructuralTag, p: ParametricTag, t: TemporalFlag) -> Self {
        KnowledgeState {
            structural: StructuralLevel::from_tag(s),
            parametric: ParametricLevel::from_tag(p),
            temporal: t,
        }
    }

    pub fn structural(&self) -> &StructuralLevel {
        &self.structural
    }

    pub fn parametric(&self) -> &ParametricLevel {
        &self.parametric
    }

    pub fn temporal(&self) -> TemporalFlag {
        self.temporal
    }

    pub fn tags(&self) -> (StructuralTag, ParametricTag, TemporalFlag) {
        (self.structural.tag(), self.parametric.tag(), self.temporal)
    }

    /// The same point with payloads dropped.
    pub fn to_tags(&self) -> Self {
        let (s, p, t) = self.tags();
        Self::from_tags(s, p, t)
    }

    /// Every tag-only state, in (structural, parametric, temporal) order.
    pub fn all_tags() -> impl Iterator<Item = KnowledgeState> {
        StructuralTag::ALL.iter().flat_map(|&s| {
            ParametricTag::ALL.iter().flat_map(move |&p| {
                TemporalFlag::ALL
                    .iter()
                    .map(move |&t| KnowledgeState::from_tags(s, p, t))
            })
        })
    }
}

impl fmt::Display for KnowledgeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (s, p, t) = self.tags();
        write!(f, "{s}:{p}:{t}")
    }
}

impl FromStr for KnowledgeState {
    type Err = LatticeError;

    /// Parses `structural:parametric:temporal`, e.g. `causal:noise_model:static`.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = || LatticeError::Parse(text.to_string());
        let parts: Vec<&str> = text.trim().split(':').collect();
        let [s, p, t] = parts[..] else {
            return Err(err());
        };
        Ok(KnowledgeState::from_tags(
            s.parse().map_err(|_| err())?,
            p.parse().map_err(|_| err())?,
            t.parse().map_err(|_| err())?,
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    structural: StructuralTag,
    parametric: ParametricTag,
    temporal: TemporalFlag,
}

/// Serializes the tags only; payloads travel in their own files.
impl Serialize for KnowledgeState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let (structural, parametric, temporal) = self.tags();
        StateRepr {
            structural,
            parametric,
            temporal,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for KnowledgeState {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = StateRepr::deserialize(deserializer)?;
        Ok(KnowledgeState::from_tags(r.structural, r.parametric, r.temporal))
    }
}

/// Whether `possessed` knowledge is enough to meet `required`. Stronger
/// knowledge may stand in for weaker; the temporal flag must match exactly.
pub fn satisfies(possessed: &KnowledgeState, required: &KnowledgeState) -> bool {
    leq_structural(&required.structural, &possessed.structural)
        && leq_parametric(&required.parametric, &possessed.parametric)
        && possessed.temporal == required.temporal
}

/// Keeps the payload of the higher tag. At equal tags a missing payload
/// yields to a present one and two different payloads conflict.
fn join_payload<T: PartialEq>(
    a: Option<&T>,
    b: Option<&T>,
    axis: Axis,
) -> Result<bool, LatticeError> {
    match (a, b) {
        (Some(x), Some(y)) if x != y => Err(LatticeError::PayloadConflict(axis)),
        (None, Some(_)) => Ok(false),
        _ => Ok(true),
    }
}

fn join_structural(
    a: &StructuralLevel,
    b: &StructuralLevel,
) -> Result<StructuralLevel, LatticeError> {
    use StructuralLevel::*;
    if a.tag() != b.tag() {
        return Ok(if a.tag() > b.tag() { a } else { b }.clone());
    }
    let keep_a = match (a, b) {
        (Plausible(x), Plausible(y)) => join_payload(x.as_ref(), y.as_ref(), Axis::Structural)?,
        (Causal(x), Causal(y)) => join_payload(x.as_ref(), y.as_ref(), Axis::Structural)?,
        _ => true,
    };
    Ok(if keep_a { a } else { b }.clone())
}

fn join_parametric(
    a: &ParametricLevel,
    b: &ParametricLevel,
) -> Result<ParametricLevel, LatticeError> {
    use ParametricLevel::*;
    if a.tag() != b.tag() {
        return Ok(if a.tag() > b.tag() { a } else { b }.clone());
    }
    let keep_a = match (a, b) {
        (NoiseModel(x), NoiseModel(y)) => join_payload(x.as_ref(), y.as_ref(), Axis::Parametric)?,
        (Parametric(x), Parametric(y)) => join_payload(x.as_ref(), y.as_ref(), Axis::Parametric)?,
        (FullyKnown(x), FullyKnown(y)) => join_payload(x.as_ref(), y.as_ref(), Axis::Parametric)?,
        _ => true,
    };
    Ok(if keep_a { a } else { b }.clone())
}

/// Componentwise least upper bound of two states with the same temporal flag.
pub fn join_states(a: &KnowledgeState, b: &KnowledgeState) -> Result<KnowledgeState, LatticeError> {
    if a.temporal != b.temporal {
        return Err(LatticeError::TemporalMismatch(a.temporal, b.temporal));
    }
    KnowledgeState::new(
        join_structural(&a.structural, &b.structural)?,
        join_parametric(&a.parametric, &b.parametric)?,
        a.temporal,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    None,
    Structural,
    Parametric,
    Both,
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransitionKind::None => "none",
            TransitionKind::Structural => "structural",
            TransitionKind::Parametric => "parametric",
            TransitionKind::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: KnowledgeState,
    pub to: KnowledgeState,
    pub kind: TransitionKind,
    /// Set when some tag strictly decreases.
    pub relaxing: bool,
}

pub fn classify_transition(from: &KnowledgeState, to: &KnowledgeState) -> Transition {
    let (fs, fp, _) = from.tags();
    let (ts, tp, _) = to.tags();
    let kind = match (fs != ts, fp != tp) {
        (false, false) => TransitionKind::None,
        (true, false) => TransitionKind::Structural,
        (false, true) => TransitionKind::Parametric,
        (true, true) => TransitionKind::Both,
    };
    Transition {
        from: from.clone(),
        to: to.clone(),
        kind,
        relaxing: ts < fs || tp < fp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ParametricTag as P;
    use StructuralTag as S;
    use TemporalFlag as T;

    fn st(s: S, p: P) -> KnowledgeState {
        KnowledgeState::from_tags(s, p, T::Static)
    }

    #[test]
    fn tag_orders() {
        let u = StructuralLevel::Unknown;
        let c = StructuralLevel::from_tag(S::Causal);
        let p = StructuralLevel::from_tag(S::Plausible);
        assert!(leq_structural(&u, &c));
        assert!(leq_structural(&c, &c));
        assert!(!leq_structural(&c, &p));
        let nm = ParametricLevel::from_tag(P::NoiseModel);
        let pa = ParametricLevel::from_tag(P::Parametric);
        let fk = ParametricLevel::from_tag(P::FullyKnown);
        assert!(leq_parametric(&nm, &pa));
        assert!(leq_parametric(&ParametricLevel::NonParametric, &ParametricLevel::NonParametric));
        assert!(!leq_parametric(&fk, &nm));
    }

    #[test]
    fn relaxation() {
        assert!(satisfies(&st(S::Causal, P::NoiseModel), &st(S::Causal, P::NonParametric)));
        assert!(!satisfies(&st(S::Plausible, P::NonParametric), &st(S::Causal, P::NonParametric)));
        let temporal = KnowledgeState::from_tags(S::Causal, P::FullyKnown, T::Temporal);
        assert!(!satisfies(&temporal, &st(S::Unknown, P::NonParametric)));
    }

    #[test]
    fn join_examples() {
        let j = join_states(&st(S::Unknown, P::NoiseModel), &st(S::Causal, P::NonParametric)).unwrap();
        assert_eq!(j, st(S::Causal, P::NoiseModel));
        let t = KnowledgeState::from_tags(S::Unknown, P::NoiseModel, T::Temporal);
        assert!(matches!(
            join_states(&t, &st(S::Unknown, P::NoiseModel)),
            Err(LatticeError::TemporalMismatch(..))
        ));
    }

    #[test]
    fn join_payloads() {
        let g1 = Dag::from_edges([("A", "B")]).unwrap();
        let g2 = Dag::from_edges([("B", "A")]).unwrap();
        let causal = |g: &Dag| {
            KnowledgeState::new(
                StructuralLevel::causal(g.clone()),
                ParametricLevel::NonParametric,
                T::Static,
            )
            .unwrap()
        };
        assert_eq!(
            join_states(&causal(&g1), &causal(&g2)),
            Err(LatticeError::PayloadConflict(Axis::Structural))
        );
        assert_eq!(join_states(&causal(&g1), &causal(&g1)).unwrap(), causal(&g1));
        // A bare tag yields to the graph it meets.
        let bare = st(S::Causal, P::NonParametric);
        assert_eq!(join_states(&bare, &causal(&g1)).unwrap(), causal(&g1));
        assert_eq!(join_states(&causal(&g1), &bare).unwrap(), causal(&g1));
        // A higher tag wins even without a payload.
        let nm = st(S::Unknown, P::NoiseModel);
        let with_form = KnowledgeState::new(
            StructuralLevel::Unknown,
            ParametricLevel::NoiseModel(Some(NoiseForm {
                family: Some(NoiseFamily::Normal),
            })),
            T::Static,
        )
        .unwrap();
        let pa = st(S::Unknown, P::Parametric);
        assert_eq!(join_states(&with_form, &pa).unwrap(), pa);
        assert_eq!(join_states(&nm, &with_form).unwrap(), with_form);
    }

    #[test]
    fn transitions() {
        let t = classify_transition(&st(S::Unknown, P::NoiseModel), &st(S::Causal, P::NoiseModel));
        assert_eq!(t.kind, TransitionKind::Structural);
        assert!(!t.relaxing);
        let t = classify_transition(&st(S::Causal, P::NonParametric), &st(S::Causal, P::NonParametric));
        assert_eq!(t.kind, TransitionKind::None);
        let t = classify_transition(&st(S::Unknown, P::NonParametric), &st(S::Unknown, P::FullyKnown));
        assert_eq!(t.kind, TransitionKind::Parametric);
        let t = classify_transition(&st(S::Causal, P::Parametric), &st(S::Plausible, P::FullyKnown));
        assert_eq!(t.kind, TransitionKind::Both);
        assert!(t.relaxing);
    }

    #[test]
    fn parse_and_print() {
        let s: KnowledgeState = "causal:noise_model:static".parse().unwrap();
        assert_eq!(s, st(S::Causal, P::NoiseModel));
        assert_eq!(s.to_string(), "causal:noise_model:static");
        for bad in ["causal:noise_model", "causal:noisemodel:static", "", "a:b:c:d"] {
            assert!(bad.parse::<KnowledgeState>().is_err(), "{bad}");
        }
        assert_eq!(KnowledgeState::all_tags().count(), 24);
    }

    #[test]
    fn json_form() {
        let s = KnowledgeState::from_tags(S::Plausible, P::FullyKnown, T::Temporal);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(
            j,
            r#"{"structural":"plausible","parametric":"fully_known","temporal":"temporal"}"#
        );
        assert_eq!(serde_json::from_str::<KnowledgeState>(&j).unwrap(), s);
    }

    #[test]
    fn plausible_payload_must_say_something() {
        assert!(PlausibleKnowledge::new(IndependenceSet::new(), None).is_err());
        let g = Dag::from_edges([("A", "B")]).unwrap();
        assert!(PlausibleKnowledge::new(IndependenceSet::new(), Some(Pdag::from_dag(&g))).is_ok());
    }
}
