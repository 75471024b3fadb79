//! Assumption tests: goodness of fit, linearity, residual independence,
//! additive-noise direction and Gaussian conditional independence, plus the
//! testability tier of each knowledge level.

mod anm;
mod cusum;
mod independence;
mod ks;
mod moments;
mod pcorr;
mod smooth;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{ParametricTag, StructuralTag};

pub use crate::data::{DataError, Dataset};
pub use anm::{anm_direction, anm_direction_with_seed, anm_window, AnmDirection, AnmResult};
pub use cusum::{cusum_critical_value, cusum_linearity_test, cusum_p_value, recursive_residuals};
pub use independence::{
    residual_independence_test, residual_independence_test_with_seed, spearman,
    DEFAULT_PERMUTATION_SEED, PERMUTATIONS,
};
pub use ks::{kolmogorov_sf, ks_exact_cdf, ks_statistic, ks_test, normal_cdf, uniform_cdf};
pub use moments::jarque_bera;
pub use pcorr::{partial_correlation, partial_correlation_ci_test};
pub use smooth::savitzky_golay_smooth;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    Empty,
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    BadAlpha(String),
    #[error("window must be odd, got {0}")]
    EvenWindow(usize),
    #[error("window must be at least 3 and at most the series length ({len}), got {window}")]
    WindowSize { window: usize, len: usize },
    #[error("degree {degree} must be below the window {window}")]
    DegreeTooHigh { degree: usize, window: usize },
    #[error("degenerate design: {0}")]
    Degenerate(String),
    #[error("correlation matrix is singular")]
    Singular,
    #[error("{0:?} is both tested and conditioned on")]
    EndpointConditioned(String),
    #[error("no column named {0:?}")]
    MissingColumn(String),
    #[error("non-finite value in input")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    RejectNull,
    FailToReject,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::RejectNull => "RejectNull",
            Decision::FailToReject => "FailToReject",
        })
    }
}

/// A level on either scale, written `structural:<tag>` or `parametric:<tag>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LevelTag {
    Structural(StructuralTag),
    Parametric(ParametricTag),
}

impl fmt::Display for LevelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelTag::Structural(t) => write!(f, "structural:{t}"),
            LevelTag::Parametric(t) => write!(f, "parametric:{t}"),
        }
    }
}

impl std::str::FromStr for LevelTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected structural:<tag> or parametric:<tag>, got {s:?}");
        let (axis, tag) = s.split_once(':').ok_or_else(bad)?;
        match axis {
            "structural" => tag.parse().map(LevelTag::Structural).map_err(|_| bad()),
            "parametric" => tag.parse().map(LevelTag::Parametric).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl Serialize for LevelTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LevelTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Outcome of one assumption test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub alpha: f64,
    pub decision: Decision,
    pub bears_on: LevelTag,
    /// Rejection threshold on the statistic, when the test has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_value: Option<f64>,
    /// Fixed procedure settings, so a report documents how it was made.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub method: String,
    /// Advisory reports that do not affect `decision`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sub_reports: Vec<TestReport>,
}

impl TestReport {
    fn from_p(
        test: &str,
        statistic: f64,
        p_value: f64,
        alpha: f64,
        bears_on: LevelTag,
        method: String,
    ) -> Self {
        let p = p_value.clamp(0.0, 1.0);
        TestReport {
            test: test.to_string(),
            statistic,
            p_value: Some(p),
            alpha,
            decision: if p < alpha {
                Decision::RejectNull
            } else {
                Decision::FailToReject
            },
            bears_on,
            critical_value: None,
            method,
            sub_reports: Vec::new(),
        }
    }

    pub fn rejected(&self) -> bool {
        self.decision == Decision::RejectNull
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "test: {}", self.test)?;
        writeln!(f, "statistic: {}", self.statistic)?;
        match self.p_value {
            Some(p) => writeln!(f, "p-value: {p}")?,
            None => writeln!(f, "p-value: n/a")?,
        }
        if let Some(c) = self.critical_value {
            writeln!(f, "critical value: {c}")?;
        }
        writeln!(f, "alpha: {}", self.alpha)?;
        writeln!(f, "decision: {}", self.decision)?;
        writeln!(f, "bears on: {}", self.bears_on)?;
        if !self.method.is_empty() {
            writeln!(f, "method: {}", self.method)?;
        }
        for sub in &self.sub_reports {
            writeln!(f, "advisory {}: statistic {}, p-value {}, {}", sub.test, sub.statistic,
                sub.p_value.map_or("n/a".to_string(), |p| p.to_string()), sub.decision)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Testability {
    NoTestsNeeded,
    Testable,
    Untestable,
}

impl fmt::Display for Testability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Testability::NoTestsNeeded => "no tests needed",
            Testability::Testable => "can be tested",
            Testability::Untestable => "untestable",
        })
    }
}

pub fn testability_tier(level: LevelTag) -> Testability {
    match level {
        LevelTag::Structural(StructuralTag::Unknown) => Testability::NoTestsNeeded,
        LevelTag::Structural(StructuralTag::Plausible) => Testability::Testable,
        LevelTag::Structural(StructuralTag::Causal) => Testability::Untestable,
        LevelTag::Parametric(ParametricTag::NonParametric) => Testability::NoTestsNeeded,
        LevelTag::Parametric(ParametricTag::NoiseModel | ParametricTag::Parametric) => {
            Testability::Testable
        }
        LevelTag::Parametric(ParametricTag::FullyKnown) => Testability::Untestable,
    }
}

fn check_alpha(alpha: f64) -> Result<(), StatsError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(StatsError::BadAlpha(alpha.to_string()))
    }
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
