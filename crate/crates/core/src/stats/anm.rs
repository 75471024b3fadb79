use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    check_alpha, residual_independence_test_with_seed, savitzky_golay_smooth, StatsError,
    TestReport, DEFAULT_PERMUTATION_SEED,
};

const MIN_N: usize = 50;
const DEGREE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnmDirection {
    XtoY,
    YtoX,
    Inconclusive,
}

impl fmt::Display for AnmDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnmDirection::XtoY => "X -> Y",
            AnmDirection::YtoX => "Y -> X",
            AnmDirection::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnmResult {
    pub direction: AnmDirection,
    pub window: usize,
    pub degree: usize,
    /// Residual test for the model `y = f(x) + u`.
    pub forward: TestReport,
    /// Residual test for the model `x = g(y) + v`.
    pub backward: TestReport,
}

/// Smoother window for `n` points: a tenth of the sample rounded up to an
/// odd number, at least 5.
pub fn anm_window(n: usize) -> usize {
    let w = n.div_ceil(10);
    let w = if w.is_multiple_of(2) { w + 1 } else { w };
    w.max(5)
}

fn fit_residuals(
    cause: &[f64],
    effect: &[f64],
    window: usize,
    alpha: f64,
    seed: u64,
) -> Result<TestReport, StatsError> {
    let mut order: Vec<usize> = (0..cause.len()).collect();
    order.sort_by(|&a, &b| cause[a].total_cmp(&cause[b]));
    let c: Vec<f64> = order.iter().map(|&i| cause[i]).collect();
    let e: Vec<f64> = order.iter().map(|&i| effect[i]).collect();
    let fitted = savitzky_golay_smooth(&e, window, DEGREE)?;
    let resid: Vec<f64> = e.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    residual_independence_test_with_seed(&c, &resid, alpha, seed)
}

pub fn anm_direction(x: &[f64], y: &[f64], alpha: f64) -> Result<AnmResult, StatsError> {
    anm_direction_with_seed(x, y, alpha, DEFAULT_PERMUTATION_SEED)
}

/// Additive-noise direction check: fit each variable as a smooth function
/// of the other and keep the direction whose residuals look independent of
/// the input. Both or neither passing is inconclusive.
pub fn anm_direction_with_seed(
    x: &[f64],
    y: &[f64],
    alpha: f64,
    seed: u64,
) -> Result<AnmResult, StatsError> {
    check_alpha(alpha)?;
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < MIN_N {
        return Err(StatsError::TooFew {
            needed: MIN_N,
            got: x.len(),
        });
    }
    let window = anm_window(x.len());
    let forward = fit_residuals(x, y, window, alpha, seed)?;
    let backward = fit_residuals(y, x, window, alpha, seed)?;
    let direction = match (forward.rejected(), backward.rejected()) {
        (false, true) => AnmDirection::XtoY,
        (true, false) => AnmDirection::YtoX,
        _ => AnmDirection::Inconclusive,
    };
    Ok(AnmResult {
        direction,
        window,
        degree: DEGREE,
        forward,
        backward,
    })
}
