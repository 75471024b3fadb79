//! Structural causal models: factorized distributions, structural equations
//! with a small closed-form expression language, ancestral sampling and a
//! Monte-Carlo CATE oracle.

mod expr;
mod factor;
mod model;
mod sample;

use thiserror::Error;

use crate::graph::GraphError;
use crate::lattice::ParametricTag;

pub use expr::{parse_expression, BinOp, ExprError, Expression, Func};
pub use factor::{
    evaluate_factorization, scopes_consistent_with_dag, Domain, Factor, FactorValues,
    Factorization, NORMALIZATION_TOL,
};
pub use model::{noise_symbol, EquationForm, NoiseSpec, Scm, StructuralEquation};
pub use sample::{ihdp_surfaces, oracle_cate, sample_scm, CONTROL_OUTCOME, TREATED_OUTCOME};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScmError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("factor: {0}")]
    Factor(String),
    #[error("factor value {0} is negative")]
    NegativeFactor(f64),
    #[error("missing variable {0:?}")]
    MissingVariable(String),
    #[error("{0} has parents but no equation")]
    MissingEquation(String),
    #[error("no distribution given for noise term {0}")]
    MissingNoise(String),
    #[error("equation for {target}: {message}")]
    Equation { target: String, message: String },
    #[error("invalid noise distribution {0:?}")]
    BadNoise(String),
    #[error("{target} is declared {level}, which has no generative form to sample")]
    Unsampleable { target: String, level: ParametricTag },
    #[error("{target} is not finite in row {row}")]
    NonFinite { target: String, row: usize },
    #[error("missing potential-outcome equation {0}")]
    MissingOutcome(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("at least one row or replicate is required")]
    ZeroRows,
}
