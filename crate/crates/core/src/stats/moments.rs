use super::{check_alpha, check_finite, mean, LevelTag, StatsError, TestReport};
use crate::lattice::ParametricTag;

/// Jarque-Bera normality test with population (divide-by-n) moments. The
/// p-value is the chi-square(2) tail, `exp(-JB / 2)`.
pub fn jarque_bera(sample: &[f64], alpha: f64) -> Result<TestReport, StatsError> {
    check_alpha(alpha)?;
    let n = sample.len();
    if n < 3 {
        return Err(StatsError::TooFew { needed: 3, got: n });
    }
    check_finite(sample)?;
    let mu = mean(sample);
    let central = |p: i32| sample.iter().map(|x| (x - mu).powi(p)).sum::<f64>() / n as f64;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    // rounding leaves a tiny positive m2 for constant samples like [0.1; n]
    if m2 <= (1e-12 * mu.abs()).powi(2) {
        return Err(StatsError::ZeroVariance);
    }
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    let jb = n as f64 / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0);
    Ok(TestReport::from_p(
        "jarque_bera",
        jb,
        (-jb / 2.0).exp(),
        alpha,
        LevelTag::Parametric(ParametricTag::NoiseModel),
        "chi-square(2) tail".to_string(),
    ))
}
