use super::{check_alpha, check_finite, ks::normal_cdf, ks_test, LevelTag, StatsError, TestReport};
use crate::lattice::ParametricTag;

const MIN_N: usize = 5;

/// Recursive residuals of a straight-line fit, in the order given. Each one
/// is the standardized one-step prediction error of the line fitted to all
/// earlier points. Recursion starts once the earlier points contain two
/// distinct `x` values.
pub fn recursive_residuals(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    // Shifting x leaves residuals unchanged and avoids cancellation.
    let shift = x.iter().sum::<f64>() / n.max(1) as f64;
    let (mut s0, mut s1, mut s2, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut out = Vec::new();
    for t in 0..n {
        let xt = x[t] - shift;
        let det = s0 * s2 - s1 * s1;
        if t >= 2 && det > 1e-12 * s0 * s2 {
            // (X'X)^-1 = [s2, -s1; -s1, s0] / det
            let b1 = (s0 * sxy - s1 * sy) / det;
            let b0 = (sy - b1 * s1) / s0;
            let leverage = (s2 - 2.0 * s1 * xt + s0 * xt * xt) / det;
            out.push((y[t] - b0 - b1 * xt) / (1.0 + leverage).sqrt());
        }
        s0 += 1.0;
        s1 += xt;
        s2 += xt * xt;
        sy += y[t];
        sxy += xt * y[t];
    }
    out
}

/// Tail probability of the Brown-Durbin-Evans CUSUM boundary crossing at
/// level `a`: `2 [1 - Phi(3a) + exp(-4a^2) Phi(a)]`, capped at 1.
pub fn cusum_p_value(a: f64) -> f64 {
    if a <= 0.0 {
        return 1.0;
    }
    let p = 2.0 * (1.0 - normal_cdf(3.0 * a) + (-4.0 * a * a).exp() * normal_cdf(a));
    p.clamp(0.0, 1.0)
}

/// The boundary level whose crossing probability is `alpha`; 0.948 at 5%.
pub fn cusum_critical_value(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cusum_p_value(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// CUSUM test of linearity in `x`.
///
/// Rows are ordered by `x`, recursive residuals `w_r` (r = 1..m) of the
/// straight-line fit are cumulated as `W_r = sum w / sigma`, with `sigma`
/// their sample standard deviation, and the statistic is
/// `max_r |W_r| / (sqrt(m) + 2 r / sqrt(m))`. Linearity is rejected when
/// the path leaves the band `a (sqrt(m) + 2 r / sqrt(m))`, with `a` = 0.948
/// at the 5% level. An exact fit has statistic 0.
///
/// The report carries an advisory K-S test of the standardized residuals
/// against the standard normal.
pub fn cusum_linearity_test(x: &[f64], y: &[f64], alpha: f64) -> Result<TestReport, StatsError> {
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
    check_finite(x)?;
    check_finite(y)?;
    if x.iter().all(|v| *v == x[0]) {
        return Err(StatsError::Degenerate("x is constant".into()));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let w = recursive_residuals(&xs, &ys);
    let m = w.len();
    if m < 2 {
        return Err(StatsError::Degenerate("too few recursive residuals".into()));
    }
    let mw = w.iter().sum::<f64>() / m as f64;
    let sigma = (w.iter().map(|v| (v - mw).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
    let scale = ys.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let critical = cusum_critical_value(alpha);
    let method = format!(
        "recursive residuals ordered by x; boundary a*(sqrt(m) + 2r/sqrt(m)), a = {critical:.4}"
    );

    let exact = sigma <= 1e-10 * scale.max(f64::MIN_POSITIVE);
    let statistic = if exact {
        0.0
    } else {
        let sm = (m as f64).sqrt();
        let mut cum = 0.0;
        let mut worst = 0.0f64;
        for (r, v) in w.iter().enumerate() {
            cum += v / sigma;
            let bound = sm + 2.0 * (r + 1) as f64 / sm;
            worst = worst.max(cum.abs() / bound);
        }
        worst
    };
    let mut report = TestReport::from_p(
        "cusum_linearity",
        statistic,
        cusum_p_value(statistic),
        alpha,
        LevelTag::Parametric(ParametricTag::Parametric),
        method,
    );
    report.critical_value = Some(critical);
    if !exact {
        let z: Vec<f64> = w.iter().map(|v| (v - mw) / sigma).collect();
        let mut ks = ks_test(&z, &normal_cdf, alpha)?;
        ks.test = "kolmogorov_smirnov_residuals".into();
        report.sub_reports.push(ks);
    }
    Ok(report)
}
