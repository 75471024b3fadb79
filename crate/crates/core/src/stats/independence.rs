use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_alpha, check_finite, LevelTag, StatsError, TestReport};
use crate::lattice::ParametricTag;

/// Number of permutations behind every permutation p-value.
pub const PERMUTATIONS: usize = 999;

/// Seed of the permutation schedule when the caller does not pick one.
pub const DEFAULT_PERMUTATION_SEED: u64 = 0x5eed_cd1c;

const MIN_N: usize = 20;

/// Ranks starting at 1, ties sharing their average rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Centered copy and its norm; a zero norm marks a constant vector.
fn centered(v: &[f64]) -> (Vec<f64>, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - m).collect();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    (c, norm)
}

fn corr_centered(a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)) -> f64 {
    if a.1 == 0.0 || b.1 == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    (dot / (a.1 * b.1)).clamp(-1.0, 1.0)
}

/// Spearman rank correlation; 0 when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    corr_centered(&centered(&ranks(x)), &centered(&ranks(y)))
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn residual_independence_test(
    x: &[f64],
    residuals: &[f64],
    alpha: f64,
) -> Result<TestReport, StatsError> {
    residual_independence_test_with_seed(x, residuals, alpha, DEFAULT_PERMUTATION_SEED)
}

/// Rank-based check that residuals carry no information about `x`.
///
/// The statistic is the largest of three absolute Spearman correlations:
/// `x` with the residuals (location), `x` with their magnitude (monotone
/// spread), and `|x - median(x)|` with their magnitude (spread that grows
/// or shrinks toward both ends). Its p-value comes from permuting the
/// residuals 999 times with a fixed seed.
pub fn residual_independence_test_with_seed(
    x: &[f64],
    residuals: &[f64],
    alpha: f64,
    seed: u64,
) -> Result<TestReport, StatsError> {
    check_alpha(alpha)?;
    if x.len() != residuals.len() {
        return Err(StatsError::LengthMismatch(x.len(), residuals.len()));
    }
    if x.len() < MIN_N {
        return Err(StatsError::TooFew {
            needed: MIN_N,
            got: x.len(),
        });
    }
    check_finite(x)?;
    check_finite(residuals)?;
    let med = median(x);
    let rx = centered(&ranks(x));
    let rdev = centered(&ranks(&x.iter().map(|v| (v - med).abs()).collect::<Vec<_>>()));
    let rr = ranks(residuals);
    let rabs = ranks(&residuals.iter().map(|v| v.abs()).collect::<Vec<_>>());

    let stat = |rr: &[f64], rabs: &[f64]| {
        let r = centered(rr);
        let a = centered(rabs);
        corr_centered(&rx, &r)
            .abs()
            .max(corr_centered(&rx, &a).abs())
            .max(corr_centered(&rdev, &a).abs())
    };
    let observed = stat(&rr, &rabs);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut pr = vec![0.0; x.len()];
    let mut pa = vec![0.0; x.len()];
    let mut at_least = 0usize;
    for _ in 0..PERMUTATIONS {
        order.shuffle(&mut rng);
        for (k, &o) in order.iter().enumerate() {
            pr[k] = rr[o];
            pa[k] = rabs[o];
        }
        if stat(&pr, &pa) >= observed - 1e-12 {
            at_least += 1;
        }
    }
    let p = (1 + at_least) as f64 / (PERMUTATIONS + 1) as f64;
    Ok(TestReport::from_p(
        "residual_independence",
        observed,
        p,
        alpha,
        LevelTag::Parametric(ParametricTag::NoiseModel),
        format!(
            "max |Spearman| of (x, r), (x, |r|), (|x - median|, |r|); {PERMUTATIONS} permutations, seed {seed}"
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Decision;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_basics() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powi(3)).collect();
        assert!((spearman(&x, &y) - 1.0).abs() < 1e-15);
        let z: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((spearman(&x, &z) + 1.0).abs() < 1e-15);
        assert_eq!(spearman(&x, &[4.0; 10]), 0.0);
    }

    #[test]
    fn constant_residuals_pass() {
        let x: Vec<f64> = (0..30).map(f64::from).collect();
        let r = residual_independence_test(&x, &[0.25; 30], 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, Some(1.0));
        assert_eq!(r.decision, Decision::FailToReject);
    }

    #[test]
    fn residuals_equal_to_x_fail() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.37 - 2.0).collect();
        let r = residual_independence_test(&x, &x, 0.05).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert_eq!(r.p_value, Some(0.001));
        assert_eq!(r.decision, Decision::RejectNull);
    }

    #[test]
    fn deterministic_and_seeded() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 37) % 17) as f64).collect();
        let r: Vec<f64> = (0..40).map(|i| ((i * 11) % 13) as f64 - 6.0).collect();
        let a = residual_independence_test(&x, &r, 0.05).unwrap();
        assert_eq!(a, residual_independence_test(&x, &r, 0.05).unwrap());
        let b = residual_independence_test_with_seed(&x, &r, 0.05, 99).unwrap();
        assert_eq!(a.statistic, b.statistic);
    }

    #[test]
    fn preconditions() {
        let x = [0.0; 25];
        assert!(matches!(residual_independence_test(&x, &x[..24], 0.05), Err(StatsError::LengthMismatch(..))));
        assert!(matches!(residual_independence_test(&x[..19], &x[..19], 0.05), Err(StatsError::TooFew { .. })));
    }
}
