//! Causal graph structures: DAGs, PDAGs, conditional-independence statements,
//! d-separation, Markov-equivalence enumeration and temporal unrolling.
//!
//! All set-valued outputs are ordered lexicographically by variable name and
//! then by edge list so results are reproducible across runs.

mod dag;
mod dsep;
mod edgelist;
mod independence;
mod mec;
mod pdag;
mod temporal;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dag::{is_acyclic, Dag};
pub use edgelist::{parse_edge_list, EdgeList};
pub use independence::{
    parse_constraints, ConstraintLine, Conditioning, IndependenceSet, IndependenceStatement,
};
pub use mec::{consistent_with, enumerate_mec, DEFAULT_MEC_CAP};
pub use pdag::Pdag;
pub use temporal::{LaggedEdge, TemporalTemplate};

/// Default node cap for [`Dag::implied_independencies`].
pub const DEFAULT_IMPLIED_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("invalid variable name {0:?}")]
    InvalidName(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("self-loop on {0:?}")]
    SelfLoop(String),
    #[error("graph contains a directed cycle")]
    Cycle,
    #[error("edge {0} -- {1} is both directed and undirected")]
    MixedEdge(String, String),
    #[error("query variables must differ ({0:?})")]
    SameEndpoints(String),
    #[error("{0:?} is both an endpoint and in the conditioning set")]
    EndpointConditioned(String),
    #[error("{nodes} nodes exceeds the enumeration cap of {cap}")]
    CapExceeded { nodes: usize, cap: usize },
    #[error("inconsistent constraints: {0} asserted both independent and dependent")]
    InconsistentConstraints(String),
    #[error("graph has undirected edges; a DAG was expected")]
    NotDirected,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("temporal template: {0}")]
    Template(String),
    #[error("graphs do not share one skeleton")]
    SkeletonMismatch,
    #[error("steps must be at least 1")]
    ZeroSteps,
}

/// A named random variable. Names are case-sensitive, nonempty and contain no
/// whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Variable(String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Result<Self, GraphError> {
        let name = name.into();
        if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == ',') {
            return Err(GraphError::InvalidName(name));
        }
        Ok(Variable(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Anything that names a variable: string slices, owned strings, or an
/// existing [`Variable`].
pub trait IntoVariable {
    fn into_variable(self) -> Result<Variable, GraphError>;
}

impl IntoVariable for Variable {
    fn into_variable(self) -> Result<Variable, GraphError> {
        Ok(self)
    }
}

impl IntoVariable for &Variable {
    fn into_variable(self) -> Result<Variable, GraphError> {
        Ok(self.clone())
    }
}

impl IntoVariable for &str {
    fn into_variable(self) -> Result<Variable, GraphError> {
        Variable::new(self)
    }
}

impl IntoVariable for String {
    fn into_variable(self) -> Result<Variable, GraphError> {
        Variable::new(self)
    }
}

impl IntoVariable for &String {
    fn into_variable(self) -> Result<Variable, GraphError> {
        Variable::new(self.as_str())
    }
}

impl TryFrom<String> for Variable {
    type Error = GraphError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Variable::new(value)
    }
}

impl TryFrom<&str> for Variable {
    type Error = GraphError;
    fn try_from(value: &str) -> Result<Self, Self::Error> {
        Variable::new(value)
    }
}

impl From<Variable> for String {
    fn from(v: Variable) -> String {
        v.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Variable {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for Variable {
    fn borrow(&self) -> &str {
        &self.0
    }
}
