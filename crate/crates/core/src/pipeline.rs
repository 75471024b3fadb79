//! Chains of method cards: validation under the relaxation rule, planning by
//! breadth-first search over knowledge states, and transition audits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{
    join_states, satisfies, Axis, KnowledgeState, LatticeError, ParametricTag, StructuralTag,
    Transition, TransitionKind,
};
use crate::registry::{Catalog, MethodCard};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("unknown card id {0:?}")]
    UnknownCard(String),
    #[error("pipeline is inconsistent at stage {stage} ({id}): {source}")]
    Inconsistent {
        stage: usize,
        id: String,
        source: LatticeError,
    },
}

/// Ordered card ids. In JSON either `["a", "b"]` or `{"stages": ["a", "b"]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "PipelineRepr")]
pub struct Pipeline {
    pub stages: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PipelineRepr {
    Bare(Vec<String>),
    Object { stages: Vec<String> },
}

impl From<PipelineRepr> for Pipeline {
    fn from(r: PipelineRepr) -> Self {
        match r {
            PipelineRepr::Bare(stages) | PipelineRepr::Object { stages } => Pipeline { stages },
        }
    }
}

impl Pipeline {
    pub fn new<S: Into<String>>(stages: impl IntoIterator<Item = S>) -> Self {
        Pipeline {
            stages: stages.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub state_before: KnowledgeState,
    pub required: KnowledgeState,
    pub satisfied: bool,
    /// Absent for the stage that failed.
    pub state_after: Option<KnowledgeState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    /// 1-based stage number.
    pub stage: usize,
    pub id: String,
    pub axes: Vec<Axis>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub start: KnowledgeState,
    pub stages: Vec<StageRecord>,
    pub overall: bool,
    pub final_state: KnowledgeState,
    pub failure: Option<Failure>,
}

fn violated_axes(possessed: &KnowledgeState, required: &KnowledgeState) -> Vec<Axis> {
    let (ps, pp, pt) = possessed.tags();
    let (rs, rp, rt) = required.tags();
    let mut out = Vec::new();
    if ps < rs {
        out.push(Axis::Structural);
    }
    if pp < rp {
        out.push(Axis::Parametric);
    }
    if pt != rt {
        out.push(Axis::Temporal);
    }
    out
}

fn resolve<'a>(c: &'a Catalog, p: &Pipeline) -> Result<Vec<&'a MethodCard>, PipelineError> {
    p.stages
        .iter()
        .map(|id| c.get(id).ok_or_else(|| PipelineError::UnknownCard(id.clone())))
        .collect()
}

/// Runs the stages in order. A stage may run when the current state
/// satisfies its a priori knowledge; the state then becomes the join of
/// itself and the stage's a posteriori knowledge. Stops at the first stage
/// that cannot run.
pub fn validate_pipeline(
    c: &Catalog,
    p: &Pipeline,
    start: &KnowledgeState,
) -> Result<ValidationReport, PipelineError> {
    let cards = resolve(c, p)?;
    let mut state = start.clone();
    let mut stages = Vec::new();
    for (i, card) in cards.into_iter().enumerate() {
        if !satisfies(&state, &card.a_priori) {
            let axes = violated_axes(&state, &card.a_priori);
            let names: Vec<String> = axes.iter().map(ToString::to_string).collect();
            let reason = format!(
                "stage {} ({}) requires {} but the pipeline only has {}; insufficient {} knowledge",
                i + 1,
                card.id,
                card.a_priori,
                state,
                names.join(" and ")
            );
            stages.push(StageRecord {
                stage: card.id.clone(),
                state_before: state.clone(),
                required: card.a_priori.clone(),
                satisfied: false,
                state_after: None,
            });
            return Ok(ValidationReport {
                start: start.clone(),
                stages,
                overall: false,
                final_state: state,
                failure: Some(Failure {
                    stage: i + 1,
                    id: card.id.clone(),
                    axes,
                    reason,
                }),
            });
        }
        let next = join_states(&state, &card.a_posteriori).map_err(|source| {
            PipelineError::Inconsistent {
                stage: i + 1,
                id: card.id.clone(),
                source,
            }
        })?;
        stages.push(StageRecord {
            stage: card.id.clone(),
            state_before: state,
            required: card.a_priori.clone(),
            satisfied: true,
            state_after: Some(next.clone()),
        });
        state = next;
    }
    Ok(ValidationReport {
        start: start.clone(),
        stages,
        overall: true,
        final_state: state,
        failure: None,
    })
}

type Tags = (StructuralTag, ParametricTag, crate::lattice::TemporalFlag);

fn state_of(t: Tags) -> KnowledgeState {
    KnowledgeState::from_tags(t.0, t.1, t.2)
}

/// Every shortest pipeline from `start` to a state satisfying `goal`, at
/// most `max_len` stages long, sorted by stage ids. Searches over tags
/// only. `[[]]` when the start already suffices, `[]` when unreachable.
pub fn plan_pipeline(
    c: &Catalog,
    start: &KnowledgeState,
    goal: &KnowledgeState,
    max_len: usize,
) -> Vec<Pipeline> {
    let start_tags = start.tags();
    if satisfies(start, goal) {
        return vec![Pipeline::default()];
    }
    // Parents at the previous depth, for every state first reached at a
    // given depth; keeping all of them lets every shortest path be rebuilt.
    let mut depth_of: HashMap<Tags, usize> = HashMap::from([(start_tags, 0)]);
    let mut parents: HashMap<Tags, BTreeSet<(Tags, String)>> = HashMap::new();
    let mut frontier: BTreeSet<Tags> = BTreeSet::from([start_tags]);
    for depth in 1..=max_len {
        let mut next: BTreeSet<Tags> = BTreeSet::new();
        for &s in &frontier {
            let here = state_of(s);
            for card in c.cards() {
                if !satisfies(&here, &card.a_priori) {
                    continue;
                }
                let Ok(after) = join_states(&here, &card.a_posteriori) else {
                    continue;
                };
                let t = after.tags();
                match depth_of.get(&t) {
                    Some(&d) if d < depth => continue,
                    Some(_) => {}
                    None => {
                        depth_of.insert(t, depth);
                    }
                }
                parents.entry(t).or_default().insert((s, card.id.clone()));
                next.insert(t);
            }
        }
        let reached: Vec<Tags> = next
            .iter()
            .copied()
            .filter(|&t| satisfies(&state_of(t), goal))
            .collect();
        if !reached.is_empty() {
            let mut plans = BTreeSet::new();
            for t in reached {
                collect_paths(t, start_tags, &parents, &mut Vec::new(), &mut plans);
            }
            return plans.into_iter().map(|stages| Pipeline { stages }).collect();
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Vec::new()
}

fn collect_paths(
    at: Tags,
    start: Tags,
    parents: &HashMap<Tags, BTreeSet<(Tags, String)>>,
    suffix: &mut Vec<String>,
    out: &mut BTreeSet<Vec<String>>,
) {
    if at == start {
        out.insert(suffix.iter().rev().cloned().collect());
        return;
    }
    for (prev, id) in parents.get(&at).into_iter().flatten() {
        suffix.push(id.clone());
        collect_paths(*prev, start, parents, suffix, out);
        suffix.pop();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub transitions: BTreeMap<String, Transition>,
    pub counts: BTreeMap<String, usize>,
    /// Cards whose output lowers some tag.
    pub relaxing: Vec<String>,
}

pub fn audit_transitions(c: &Catalog) -> AuditReport {
    let mut transitions = BTreeMap::new();
    let mut counts: BTreeMap<String, usize> = [
        TransitionKind::None,
        TransitionKind::Structural,
        TransitionKind::Parametric,
        TransitionKind::Both,
    ]
    .iter()
    .map(|k| (k.to_string(), 0))
    .collect();
    let mut relaxing = Vec::new();
    for card in c.cards() {
        let t = card.transition();
        *counts.entry(t.kind.to_string()).or_default() += 1;
        if t.relaxing {
            relaxing.push(card.id.clone());
        }
        transitions.insert(card.id.clone(), t);
    }
    AuditReport {
        transitions,
        counts,
        relaxing,
    }
}

fn pad_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|j| rows.iter().filter_map(|r| r.get(j)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (j, cell) in r.iter().enumerate() {
            if j + 1 == r.len() {
                line.push_str(cell);
            } else {
                let _ = write!(line, "{cell:<w$}  ", w = widths[j]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

const PARAM_LABELS: [&str; 4] = ["NP", "NM", "Pa", "FK"];

/// One knowledge grid: structural rows (causal on top) by parametric
/// columns. `a` marks the card's a priori cell, `p` its a posteriori cell,
/// `x` a cell that is both.
pub fn render_grid(prior: &KnowledgeState, posterior: &KnowledgeState) -> String {
    let (ps, pp, _) = prior.tags();
    let (qs, qp, _) = posterior.tags();
    let mut out = String::new();
    let _ = writeln!(out, "             {}", PARAM_LABELS.map(|l| format!("{l:<3}")).join(" ").trim_end());
    for &s in StructuralTag::ALL.iter().rev() {
        let cells: Vec<&str> = ParametricTag::ALL
            .iter()
            .map(|&p| match (s == ps && p == pp, s == qs && p == qp) {
                (true, true) => "x",
                (true, false) => "a",
                (false, true) => "p",
                _ => ".",
            })
            .collect();
        let row: Vec<String> = cells.iter().map(|c| format!("{c:<3}")).collect();
        let _ = writeln!(out, "  {:<10} {}", s.as_str(), row.join(" ").trim_end());
    }
    out
}

/// Verdict, per-stage table and one grid per stage.
pub fn render_validation(report: &ValidationReport, c: &Catalog) -> String {
    let mut out = String::new();
    out.push_str(if report.overall { "VALID\n" } else { "INVALID\n" });
    let mut rows = vec![["#", "stage", "before", "requires", "ok", "after"].map(String::from).to_vec()];
    for (i, s) in report.stages.iter().enumerate() {
        rows.push(vec![
            (i + 1).to_string(),
            s.stage.clone(),
            s.state_before.to_string(),
            s.required.to_string(),
            if s.satisfied { "yes" } else { "no" }.to_string(),
            s.state_after.as_ref().map_or("-".to_string(), ToString::to_string),
        ]);
    }
    out.push_str(&pad_table(&rows));
    let _ = writeln!(out, "start: {}", report.start);
    let _ = writeln!(out, "final: {}", report.final_state);
    if let Some(f) = &report.failure {
        let _ = writeln!(out, "reason: {}", f.reason);
    }
    for (i, s) in report.stages.iter().enumerate() {
        if let Some(card) = c.get(&s.stage) {
            let _ = writeln!(out, "\n[{}] {} ({}, {})", i + 1, card.id, card.name, card.a_priori.temporal());
            out.push_str(&render_grid(&card.a_priori, &card.a_posteriori));
        }
    }
    out
}

pub fn render_audit(a: &AuditReport) -> String {
    let mut rows = vec![["id", "a priori", "a posteriori", "kind", "relaxing"].map(String::from).to_vec()];
    for (id, t) in &a.transitions {
        rows.push(vec![
            id.clone(),
            t.from.to_string(),
            t.to.to_string(),
            t.kind.to_string(),
            if t.relaxing { "yes" } else { "no" }.to_string(),
        ]);
    }
    let mut out = pad_table(&rows);
    let counts: Vec<String> = a.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let _ = writeln!(out, "counts: {}", counts.join(" "));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str) -> KnowledgeState {
        text.parse().unwrap()
    }

    #[test]
    fn resit_then_decaf() {
        let c = Catalog::seed();
        let r = validate_pipeline(&c, &Pipeline::new(["resit", "decaf"]), &s("unknown:noise_model:static")).unwrap();
        assert!(r.overall);
        assert_eq!(r.stages[0].state_after, Some(s("causal:noise_model:static")));
        assert_eq!(r.stages[1].state_before, s("causal:noise_model:static"));
        assert!(satisfies(&r.final_state, &s("causal:nonparametric:static")));
    }

    #[test]
    fn decaf_alone_fails_on_structure() {
        let c = Catalog::seed();
        let r = validate_pipeline(&c, &Pipeline::new(["decaf"]), &s("unknown:nonparametric:static")).unwrap();
        assert!(!r.overall);
        let f = r.failure.unwrap();
        assert_eq!((f.stage, f.axes), (1, vec![Axis::Structural]));
    }

    #[test]
    fn empty_and_unknown() {
        let c = Catalog::seed();
        let start = s("plausible:parametric:temporal");
        let r = validate_pipeline(&c, &Pipeline::default(), &start).unwrap();
        assert!(r.overall);
        assert_eq!(r.final_state, start);
        assert_eq!(
            validate_pipeline(&c, &Pipeline::new(["nope"]), &start),
            Err(PipelineError::UnknownCard("nope".into()))
        );
    }

    #[test]
    fn temporal_axis_failure() {
        let c = Catalog::seed();
        let r = validate_pipeline(&c, &Pipeline::new(["msm"]), &s("causal:fully_known:static")).unwrap();
        assert_eq!(r.failure.unwrap().axes, vec![Axis::Temporal]);
    }

    #[test]
    fn planning() {
        let c = Catalog::seed();
        let two = c.subset(&["resit", "decaf"]);
        let plans = plan_pipeline(&two, &s("unknown:noise_model:static"), &s("causal:nonparametric:static"), 4);
        assert_eq!(plans, vec![Pipeline::new(["resit"])]);
        assert_eq!(
            plan_pipeline(&c, &s("unknown:noise_model:static"), &s("causal:nonparametric:static"), 4),
            vec![Pipeline::new(["resit"])]
        );
        assert_eq!(
            plan_pipeline(&c, &s("causal:noise_model:static"), &s("causal:nonparametric:static"), 0),
            vec![Pipeline::default()]
        );
        assert!(plan_pipeline(&c, &s("unknown:nonparametric:static"), &s("causal:fully_known:static"), 6).is_empty());
        // two steps: learn equations needs a parametric causal model first
        let plans = plan_pipeline(&c, &s("unknown:parametric:temporal"), &s("causal:fully_known:temporal"), 6);
        assert!(plans.is_empty());
        let plans = plan_pipeline(&c, &s("causal:parametric:temporal"), &s("causal:fully_known:temporal"), 6);
        assert_eq!(plans, vec![Pipeline::new(["ode-discovery"])]);
    }

    #[test]
    fn all_shortest_plans_are_listed() {
        let json = r#"[
          {"id":"a","name":"A","citation_key":"k","a_priori":{"structural":"unknown","parametric":"nonparametric","temporal":"static"},"a_posteriori":{"structural":"plausible","parametric":"nonparametric","temporal":"static"}},
          {"id":"b","name":"B","citation_key":"k","a_priori":{"structural":"unknown","parametric":"nonparametric","temporal":"static"},"a_posteriori":{"structural":"unknown","parametric":"noise_model","temporal":"static"}},
          {"id":"c","name":"C","citation_key":"k","a_priori":{"structural":"plausible","parametric":"nonparametric","temporal":"static"},"a_posteriori":{"structural":"plausible","parametric":"noise_model","temporal":"static"}}
        ]"#;
        let c = Catalog::from_json_str(json).unwrap();
        let plans = plan_pipeline(&c, &s("unknown:nonparametric:static"), &s("plausible:noise_model:static"), 5);
        assert_eq!(plans, vec![Pipeline::new(["a", "b"]), Pipeline::new(["a", "c"]), Pipeline::new(["b", "a"])]);
        for p in &plans {
            assert!(validate_pipeline(&c, p, &s("unknown:nonparametric:static")).unwrap().overall);
        }
        assert!(plan_pipeline(&c, &s("unknown:nonparametric:static"), &s("plausible:noise_model:static"), 1).is_empty());
    }

    #[test]
    fn audit() {
        let a = audit_transitions(&Catalog::seed());
        assert_eq!(a.transitions["resit"].kind, TransitionKind::Structural);
        assert_eq!(a.transitions["ganite"].kind, TransitionKind::None);
        assert_eq!(a.transitions["ode-discovery"].kind, TransitionKind::Parametric);
        assert_eq!(a.counts.values().sum::<usize>(), a.transitions.len());
        assert!(a.relaxing.is_empty());
        assert!(render_audit(&a).contains("resit"));
    }

    #[test]
    fn pipeline_json_forms() {
        let a: Pipeline = serde_json::from_str(r#"["resit", "decaf"]"#).unwrap();
        let b: Pipeline = serde_json::from_str(r#"{"stages": ["resit", "decaf"]}"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), r#"{"stages":["resit","decaf"]}"#);
    }

    #[test]
    fn grid_marks() {
        let g = render_grid(&s("unknown:noise_model:static"), &s("causal:noise_model:static"));
        let lines: Vec<&str> = g.lines().collect();
        assert_eq!(lines[0].trim(), "NP  NM  Pa  FK");
        assert_eq!(lines[1].trim(), "causal     .   p   .   .");
        assert_eq!(lines[3].trim(), "unknown    .   a   .   .");
    }
}
