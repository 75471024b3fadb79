use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Dag, GraphError, Variable};

/// A cross-step edge `from` at step t to `to` at step t + lag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaggedEdge {
    pub from: String,
    pub to: String,
    #[serde(default = "one")]
    pub lag: i64,
}

fn one() -> i64 {
    1
}

/// A repeating per-step causal structure.
///
/// `within` edges are instantiated inside every step; `initial`, when set,
/// replaces them for the first step only (the first slice of a dynamic model
/// often has its own structure). `lagged` edges connect consecutive steps and
/// must point forward in time with lag exactly 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalTemplate {
    pub roles: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<(String, String)>>,
    #[serde(default)]
    pub within: Vec<(String, String)>,
    #[serde(default)]
    pub lagged: Vec<LaggedEdge>,
}

impl TemporalTemplate {
    /// Time-varying confounding over treatments `A`, covariates `X`, hidden
    /// confounders `U` and outcomes `Y`. Two steps unroll to 8 nodes and 11
    /// edges.
    pub fn confounding_over_time() -> Self {
        let pair = |a: &str, b: &str| (a.to_string(), b.to_string());
        let lag = |a: &str, b: &str| LaggedEdge {
            from: a.to_string(),
            to: b.to_string(),
            lag: 1,
        };
        TemporalTemplate {
            roles: ["X", "A", "U", "Y"].map(String::from).into(),
            initial: Some(vec![
                pair("X", "Y"),
                pair("X", "A"),
                pair("X", "U"),
                pair("A", "U"),
            ]),
            within: vec![pair("X", "Y"), pair("X", "A"), pair("U", "X")],
            lagged: vec![lag("X", "X"), lag("A", "X"), lag("U", "X"), lag("U", "U")],
        }
    }

    fn validate(&self) -> Result<(), GraphError> {
        let roles: BTreeSet<&str> = self.roles.iter().map(String::as_str).collect();
        if roles.len() != self.roles.len() {
            return Err(GraphError::Template("duplicate role".into()));
        }
        for r in &self.roles {
            Variable::new(r.as_str())?;
        }
        let known = |r: &str| {
            if roles.contains(r) {
                Ok(())
            } else {
                Err(GraphError::Template(format!("unknown role {r:?}")))
            }
        };
        let step_edges = self.initial.iter().flatten().chain(self.within.iter());
        for (a, b) in step_edges {
            known(a)?;
            known(b)?;
        }
        for e in &self.lagged {
            known(&e.from)?;
            known(&e.to)?;
            if e.lag <= 0 {
                return Err(GraphError::Template(format!(
                    "edge {} -> {} with lag {} does not point forward in time",
                    e.from, e.to, e.lag
                )));
            }
            if e.lag > 1 {
                return Err(GraphError::Template(format!(
                    "edge {} -> {} has lag {}; only lag 1 is supported",
                    e.from, e.to, e.lag
                )));
            }
        }
        Ok(())
    }

    /// Instantiates `steps` copies of the template as `<role>_<t>` nodes.
    pub fn unroll(&self, steps: usize) -> Result<Dag, GraphError> {
        if steps == 0 {
            return Err(GraphError::ZeroSteps);
        }
        self.validate()?;
        let name = |role: &str, t: usize| format!("{role}_{t}");
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for t in 1..=steps {
            nodes.extend(self.roles.iter().map(|r| name(r, t)));
            let step_edges = match (&self.initial, t) {
                (Some(first), 1) => first,
                _ => &self.within,
            };
            edges.extend(step_edges.iter().map(|(a, b)| (name(a, t), name(b, t))));
            if t > 1 {
                edges.extend(
                    self.lagged
                        .iter()
                        .map(|e| (name(&e.from, t - 1), name(&e.to, t))),
                );
            }
        }
        Dag::new(nodes, edges)
    }
}
