use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{parse_expression, BinOp, Expression, ScmError};
use crate::graph::{parse_edge_list, Dag, GraphError, Variable};
use crate::lattice::{NoiseFamily, ParametricTag};

/// Distribution of an exogenous noise term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// Mean and standard deviation.
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl NoiseSpec {
    pub fn normal(mean: f64, sd: f64) -> Result<Self, ScmError> {
        if !(mean.is_finite() && sd.is_finite() && sd >= 0.0) {
            return Err(ScmError::BadNoise(format!("Normal({mean}, {sd})")));
        }
        Ok(NoiseSpec::Normal { mean, sd })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self, ScmError> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(ScmError::BadNoise(format!("Uniform({lo}, {hi})")));
        }
        Ok(NoiseSpec::Uniform { lo, hi })
    }

    pub fn family(&self) -> NoiseFamily {
        match self {
            NoiseSpec::Normal { .. } => NoiseFamily::Normal,
            NoiseSpec::Uniform { .. } => NoiseFamily::Uniform,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseSpec::Normal { mean, sd } => {
                Normal::new(mean, sd).expect("validated").sample(rng)
            }
            NoiseSpec::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::Normal { mean, sd } => write!(f, "Normal({mean}, {sd})"),
            NoiseSpec::Uniform { lo, hi } => write!(f, "Uniform({lo}, {hi})"),
        }
    }
}

impl FromStr for NoiseSpec {
    type Err = ScmError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ScmError::BadNoise(s.trim().to_string());
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let args: Vec<f64> = inner
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let [a, b] = args[..] else { return Err(bad()) };
        match s[..open].trim() {
            "Normal" => NoiseSpec::normal(a, b),
            "Uniform" => NoiseSpec::uniform(a, b),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EquationForm {
    /// NonParametric or Parametric: the level is declared but there is no
    /// generative form to sample from.
    Descriptive(ParametricTag),
    /// `target = g(parents) + U_target`.
    Additive(Expression),
    /// `target := f*(parents, U_target)`.
    Closed(Expression),
}

/// Name of the noise term feeding `target`.
pub fn noise_symbol(target: &str) -> String {
    format!("U_{target}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralEquation {
    target: Variable,
    parents: BTreeSet<Variable>,
    form: EquationForm,
}

impl StructuralEquation {
    pub fn new(
        target: Variable,
        parents: BTreeSet<Variable>,
        form: EquationForm,
    ) -> Result<Self, ScmError> {
        let u = noise_symbol(target.as_str());
        let check_refs = |e: &Expression, noise_ok: bool| {
            for name in e.variables() {
                let ok = parents.iter().any(|p| p.as_str() == name) || (noise_ok && name == u);
                if !ok {
                    return Err(ScmError::Equation {
                        target: target.to_string(),
                        message: format!("references {name:?}, which is not a parent"),
                    });
                }
            }
            Ok(())
        };
        match &form {
            EquationForm::Descriptive(ParametricTag::NonParametric | ParametricTag::Parametric) => {}
            EquationForm::Descriptive(tag) => {
                return Err(ScmError::Equation {
                    target: target.to_string(),
                    message: format!("level {tag} needs an explicit form"),
                })
            }
            EquationForm::Additive(g) => check_refs(g, false)?,
            EquationForm::Closed(f) => check_refs(f, true)?,
        }
        Ok(StructuralEquation {
            target,
            parents,
            form,
        })
    }

    pub fn target(&self) -> &Variable {
        &self.target
    }

    pub fn parents(&self) -> &BTreeSet<Variable> {
        &self.parents
    }

    pub fn form(&self) -> &EquationForm {
        &self.form
    }

    pub fn level(&self) -> ParametricTag {
        match &self.form {
            EquationForm::Descriptive(t) => *t,
            EquationForm::Additive(_) => ParametricTag::NoiseModel,
            EquationForm::Closed(_) => ParametricTag::FullyKnown,
        }
    }

    /// Whether the target's own noise term enters the equation.
    pub fn uses_noise(&self) -> bool {
        match &self.form {
            EquationForm::Descriptive(_) | EquationForm::Additive(_) => true,
            EquationForm::Closed(f) => f.variables().contains(noise_symbol(self.target.as_str()).as_str()),
        }
    }
}

impl fmt::Display for StructuralEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.target;
        match &self.form {
            EquationForm::Descriptive(tag) => write!(f, "{t} ~ {tag}"),
            EquationForm::Additive(g) => write!(f, "{t} = {g} + {}", noise_symbol(t.as_str())),
            EquationForm::Closed(e) => write!(f, "{t} := {e}"),
        }
    }
}

/// A DAG with one structural equation per endogenous node and a noise
/// distribution per noise term.
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    graph: Dag,
    equations: BTreeMap<Variable, StructuralEquation>,
    noise: BTreeMap<Variable, NoiseSpec>,
}

impl Scm {
    /// `noise` is keyed by the variable the term feeds (`Y` for `U_Y`).
    pub fn new(
        graph: Dag,
        equations: Vec<StructuralEquation>,
        noise: BTreeMap<Variable, NoiseSpec>,
    ) -> Result<Self, ScmError> {
        let mut eqs = BTreeMap::new();
        for eq in equations {
            let t = eq.target.clone();
            let graph_parents: BTreeSet<Variable> = graph
                .parents_of(t.as_str())
                .map_err(|_| ScmError::MissingVariable(t.to_string()))?
                .into_iter()
                .cloned()
                .collect();
            if graph_parents != eq.parents {
                return Err(ScmError::Equation {
                    target: t.to_string(),
                    message: "parent set differs from the graph".into(),
                });
            }
            if eqs.insert(t.clone(), eq).is_some() {
                return Err(ScmError::Equation {
                    target: t.to_string(),
                    message: "defined twice".into(),
                });
            }
        }
        for v in noise.keys() {
            if !graph.contains(v.as_str()) {
                return Err(ScmError::MissingVariable(noise_symbol(v.as_str())));
            }
        }
        for v in graph.nodes() {
            match eqs.get(v) {
                Some(eq) => {
                    let needs = matches!(eq.form, EquationForm::Additive(_) | EquationForm::Closed(_))
                        && eq.uses_noise();
                    if needs && !noise.contains_key(v) {
                        return Err(ScmError::MissingNoise(noise_symbol(v.as_str())));
                    }
                    if matches!(eq.form, EquationForm::Closed(_)) && !eq.uses_noise() && noise.contains_key(v) {
                        return Err(ScmError::Equation {
                            target: v.to_string(),
                            message: format!("{} is declared but never used", noise_symbol(v.as_str())),
                        });
                    }
                }
                None => {
                    if !graph.parents_of(v.as_str()).expect("node").is_empty() {
                        return Err(ScmError::MissingEquation(v.to_string()));
                    }
                    if !noise.contains_key(v) {
                        return Err(ScmError::MissingNoise(noise_symbol(v.as_str())));
                    }
                }
            }
        }
        Ok(Scm {
            graph,
            equations: eqs,
            noise,
        })
    }

    pub fn graph(&self) -> &Dag {
        &self.graph
    }

    pub fn equation(&self, v: &str) -> Option<&StructuralEquation> {
        self.equations.get(v)
    }

    pub fn equations(&self) -> impl Iterator<Item = &StructuralEquation> {
        self.equations.values()
    }

    pub fn noise(&self, v: &str) -> Option<&NoiseSpec> {
        self.noise.get(v)
    }

    /// Parses the sectioned text format:
    ///
    /// ```text
    /// graph:
    /// X -> Y
    /// equations:
    /// Y = 2 * X + U
    /// noise:
    /// U_X ~ Normal(0, 1)
    /// U_Y ~ Normal(0, 0.1)
    /// ```
    ///
    /// `Y = g + U` declares an additive-noise equation, `Y := f` a fully
    /// known one where `U` or `U_Y` may appear, and `Y ~ nonparametric` or
    /// `Y ~ parametric` a level without a generative form. Nodes without an
    /// equation are exogenous and need a noise line.
    pub fn parse(text: &str) -> Result<Self, ScmError> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Graph,
            Equations,
            Noise,
        }
        let mut section = Section::None;
        let mut nodes = BTreeSet::new();
        let mut edges = Vec::new();
        let mut raw_equations = Vec::new();
        let mut noise = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ScmError::Parse {
                line: line_no,
                message,
            };
            match line {
                "graph:" => section = Section::Graph,
                "equations:" => section = Section::Equations,
                "noise:" => section = Section::Noise,
                _ => match section {
                    Section::None => return Err(err("expected a section header".into())),
                    Section::Graph => {
                        let parsed = parse_edge_list(line).map_err(|e| match e {
                            GraphError::Parse { message, .. } => err(message),
                            other => err(other.to_string()),
                        })?;
                        if !parsed.undirected.is_empty() {
                            return Err(err("SCM graphs must be directed".into()));
                        }
                        nodes.extend(parsed.nodes);
                        edges.extend(parsed.directed);
                    }
                    Section::Equations => raw_equations.push((line_no, line.to_string())),
                    Section::Noise => {
                        let (name, spec) = line
                            .split_once('~')
                            .ok_or_else(|| err("expected `U_X ~ Family(a, b)`".into()))?;
                        let name = name.trim();
                        let target = name
                            .strip_prefix("U_")
                            .ok_or_else(|| err(format!("noise term {name:?} must be named U_<variable>")))?;
                        let target = Variable::new(target).map_err(|e| err(e.to_string()))?;
                        let spec: NoiseSpec = spec.parse().map_err(|e: ScmError| err(e.to_string()))?;
                        if noise.insert(target, spec).is_some() {
                            return Err(err(format!("{name} declared twice")));
                        }
                    }
                },
            }
        }
        let graph = Dag::new(nodes, edges)?;
        let mut equations = Vec::new();
        for (line_no, line) in raw_equations {
            let eq = parse_equation(&line, &graph).map_err(|e| match e {
                ScmError::Parse { message, .. } => ScmError::Parse {
                    line: line_no,
                    message,
                },
                other => ScmError::Parse {
                    line: line_no,
                    message: other.to_string(),
                },
            })?;
            equations.push(eq);
        }
        Scm::new(graph, equations, noise)
    }

    /// Renders the text format accepted by [`Scm::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::from("graph:\n");
        out.push_str(&self.graph.to_edge_list());
        out.push_str("equations:\n");
        for eq in self.equations.values() {
            out.push_str(&format!("{eq}\n"));
        }
        out.push_str("noise:\n");
        for (v, spec) in &self.noise {
            out.push_str(&format!("{} ~ {spec}\n", noise_symbol(v.as_str())));
        }
        out
    }
}

fn parse_equation(line: &str, graph: &Dag) -> Result<StructuralEquation, ScmError> {
    let parse_err = |message: String| ScmError::Parse { line: 0, message };
    let (lhs, rhs, kind) = if let Some((l, r)) = line.split_once(":=") {
        (l, r, ":=")
    } else if let Some((l, r)) = line.split_once('=') {
        (l, r, "=")
    } else if let Some((l, r)) = line.split_once('~') {
        (l, r, "~")
    } else {
        return Err(parse_err("expected `Y = g + U`, `Y := f` or `Y ~ level`".into()));
    };
    let target = Variable::new(lhs.trim()).map_err(|e| parse_err(e.to_string()))?;
    if !graph.contains(target.as_str()) {
        return Err(parse_err(format!("{target} is not in the graph")));
    }
    let parents: BTreeSet<Variable> = graph
        .parents_of(target.as_str())?
        .into_iter()
        .cloned()
        .collect();
    let u = noise_symbol(target.as_str());
    let alias = |e: &Expression| e.rename(&|n: &str| (n == "U").then(|| u.clone()));
    let form = match kind {
        "~" => {
            let tag: ParametricTag = rhs
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("unknown level {:?}", rhs.trim())))?;
            EquationForm::Descriptive(tag)
        }
        ":=" => EquationForm::Closed(alias(&parse_expression(rhs)?)),
        _ => {
            let e = alias(&parse_expression(rhs)?);
            match e {
                Expression::Bin(BinOp::Add, g, last) if *last == Expression::Var(u.clone()) => {
                    EquationForm::Additive(*g)
                }
                _ => {
                    return Err(parse_err(format!(
                        "additive equation must end with `+ U` (or `+ {u}`)"
                    )))
                }
            }
        }
    };
    StructuralEquation::new(target, parents, form)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINEAR: &str = "graph:\nX -> Y\nequations:\nY = 2*X + U\nnoise:\nU_X ~ Normal(0, 1)\nU_Y ~ Normal(0, 0.01)\n";

    #[test]
    fn parse_and_print_round_trip() {
        let m = Scm::parse(LINEAR).unwrap();
        assert_eq!(m.equation("Y").unwrap().level(), ParametricTag::NoiseModel);
        assert!(m.equation("X").is_none());
        let text = m.to_text();
        assert_eq!(
            text,
            "graph:\nX -> Y\nequations:\nY = 2 * X + U_Y\nnoise:\nU_X ~ Normal(0, 1)\nU_Y ~ Normal(0, 0.01)\n"
        );
        assert_eq!(Scm::parse(&text).unwrap(), m);
    }

    #[test]
    fn closed_form_and_descriptive_levels() {
        let m = Scm::parse("graph:\nX\nequations:\nX := 3\n").unwrap();
        assert_eq!(m.equation("X").unwrap().level(), ParametricTag::FullyKnown);
        let m = Scm::parse(
            "graph:\nA -> B\nequations:\nB := A * U\nA ~ nonparametric\nnoise:\nU_B ~ Uniform(-1, 1)\n",
        )
        .unwrap();
        assert!(m.equation("B").unwrap().uses_noise());
        assert_eq!(m.equation("A").unwrap().level(), ParametricTag::NonParametric);
    }

    #[test]
    fn invalid_models() {
        let cases = [
            // missing noise for an additive equation
            "graph:\nX -> Y\nequations:\nY = X + U\nnoise:\nU_X ~ Normal(0,1)\n",
            // endogenous node without an equation
            "graph:\nX -> Y\nnoise:\nU_X ~ Normal(0,1)\nU_Y ~ Normal(0,1)\n",
            // non-parent referenced
            "graph:\nX\nY\nequations:\nY := X\nnoise:\nU_X ~ Normal(0,1)\n",
            // additive equation without trailing noise
            "graph:\nX -> Y\nequations:\nY = X\nnoise:\nU_X ~ Normal(0,1)\nU_Y ~ Normal(0,1)\n",
            // noise inside g
            "graph:\nX -> Y\nequations:\nY = X * U + U\nnoise:\nU_X ~ Normal(0,1)\nU_Y ~ Normal(0,1)\n",
            // cycle
            "graph:\nX -> Y\nY -> X\n",
            // unknown family
            "graph:\nX\nnoise:\nU_X ~ Cauchy(0, 1)\n",
            // negative scale
            "graph:\nX\nnoise:\nU_X ~ Normal(0, -1)\n",
            // content outside sections
            "X -> Y\n",
            // unused noise on a closed form
            "graph:\nX\nequations:\nX := 1\nnoise:\nU_X ~ Normal(0, 1)\n",
            // fully known without a form
            "graph:\nX\nequations:\nX ~ fully_known\n",
        ];
        for text in cases {
            assert!(Scm::parse(text).is_err(), "{text}");
        }
        assert!(matches!(
            Scm::parse("graph:\nX -> Y\nY -> X\n"),
            Err(ScmError::Graph(GraphError::Cycle))
        ));
        assert!(matches!(
            Scm::parse("graph:\nX\nequations:\nX := 1 +\n"),
            Err(ScmError::Parse { line: 4, .. })
        ));
    }
}
