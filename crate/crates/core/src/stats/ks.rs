use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use super::{check_alpha, check_finite, LevelTag, StatsError, TestReport};
use crate::lattice::ParametricTag;

/// Sample sizes below this use the exact distribution of D.
const EXACT_BELOW: usize = 35;

pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(x)
}

pub fn uniform_cdf(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    move |x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// `sup |F_n - F|`, taking both one-sided gaps at every sample point.
pub fn ks_statistic(sample: &[f64], cdf: &dyn Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    })
}

/// `P(D_n < d)` for a continuous null, by the Marsaglia-Tsang-Wang matrix
/// method. Intended for small `n`; entries overflow past a few hundred.
pub fn ks_exact_cdf(n: usize, d: f64) -> f64 {
    let nf = n as f64;
    if d <= 0.5 / nf {
        return 0.0;
    }
    if d >= 1.0 {
        return 1.0;
    }
    let nd = nf * d;
    let k = nd.floor() as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nd;
    let mut hm = DMatrix::<f64>::from_fn(m, m, |i, j| if i + 1 >= j { 1.0 } else { 0.0 });
    for i in 0..m {
        hm[(i, 0)] -= h.powi(i as i32 + 1);
        hm[(m - 1, i)] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1, 0)] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 > j {
                for g in 1..=(i + 1 - j) {
                    hm[(i, j)] /= g as f64;
                }
            }
        }
    }
    let mut q = DMatrix::<f64>::identity(m, m);
    let mut base = hm;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            q = &q * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    let mut s = q[(k - 1, k - 1)];
    for i in 1..=n {
        s *= i as f64 / nf;
    }
    s.clamp(0.0, 1.0)
}

/// Survival function of the limiting Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-theta form of the CDF converges fast for small arguments.
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let cdf: f64 = (1..=20)
            .map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp())
            .sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / lambda;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against a continuous reference CDF.
pub fn ks_test(
    sample: &[f64],
    reference_cdf: &dyn Fn(f64) -> f64,
    alpha: f64,
) -> Result<TestReport, StatsError> {
    check_alpha(alpha)?;
    if sample.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(sample)?;
    let n = sample.len();
    let d = ks_statistic(sample, reference_cdf);
    let (p, method) = if n < EXACT_BELOW {
        (1.0 - ks_exact_cdf(n, d), "exact distribution of D (n < 35)")
    } else {
        (
            kolmogorov_sf((n as f64).sqrt() * d),
            "asymptotic Kolmogorov distribution of sqrt(n) D",
        )
    };
    Ok(TestReport::from_p(
        "kolmogorov_smirnov",
        d,
        p,
        alpha,
        LevelTag::Parametric(ParametricTag::NoiseModel),
        method.to_string(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        let r = ks_test(&[0.5], &uniform_cdf(0.0, 1.0), 0.05).unwrap();
        assert_eq!(r.statistic, 0.5);
        assert_eq!(r.p_value, Some(1.0));
    }

    #[test]
    fn staircase_gap() {
        for n in [1usize, 4, 10, 100] {
            let xs: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
            let d = ks_statistic(&xs, &uniform_cdf(0.0, 1.0));
            assert!((d - 0.5 / n as f64).abs() < 1e-15, "{n}: {d}");
        }
    }

    // Reference values of P(D_n >= d) from an independent implementation.
    #[test]
    fn exact_tail_matches_reference() {
        let cases = [
            (1, 0.75, 0.5),
            (5, 0.3, 0.664),
            (5, 0.5, 0.112),
            (10, 0.2, 0.74871904),
            (10, 0.41, 0.04932075782870493),
            (20, 0.15, 0.7044671549442872),
            (20, 0.29, 0.05530521461753235),
            (34, 0.2, 0.11439692631438159),
            (3, 0.9, 0.002),
        ];
        for (n, d, want) in cases {
            let got = 1.0 - ks_exact_cdf(n, d);
            assert!((got - want).abs() < 1e-9, "n={n} d={d}: {got} vs {want}");
        }
    }

    #[test]
    fn asymptotic_tail_matches_reference() {
        let cases = [
            (0.5, 0.9639452436648751),
            (1.0, 0.26999967167735456),
            (1.36, 0.049485876755377876),
            (2.0, 0.0006709252557796953),
        ];
        for (x, want) in cases {
            let got = kolmogorov_sf(x);
            assert!((got - want).abs() < 1e-12, "{x}: {got} vs {want}");
        }
        // both series agree where they hand over
        assert!((kolmogorov_sf(1.1799999) - kolmogorov_sf(1.18)).abs() < 1e-6);
    }

    #[test]
    fn affine_invariance() {
        let xs = [0.1, -1.3, 0.7, 2.2, -0.4, 0.05, 1.1];
        let d0 = ks_statistic(&xs, &normal_cdf);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let d1 = ks_statistic(&ys, &|y| normal_cdf((y + 2.0) / 3.0));
        assert!((d0 - d1).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(ks_test(&[], &normal_cdf, 0.05), Err(StatsError::Empty));
        assert!(ks_test(&[1.0], &normal_cdf, 1.0).is_err());
        assert!(ks_test(&[f64::NAN], &normal_cdf, 0.05).is_err());
    }
}
