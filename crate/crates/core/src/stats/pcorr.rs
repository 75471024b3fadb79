use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use super::{check_alpha, ks::normal_cdf, mean, Dataset, LevelTag, StatsError, TestReport};
use crate::lattice::StructuralTag;

fn column<'a>(d: &'a Dataset, name: &str) -> Result<&'a [f64], StatsError> {
    d.column(name)
        .map_err(|_| StatsError::MissingColumn(name.to_string()))
}

fn pearson_matrix(cols: &[&[f64]]) -> Result<DMatrix<f64>, StatsError> {
    let centered: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let m = mean(c);
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if norms.contains(&0.0) {
        return Err(StatsError::Singular);
    }
    let k = cols.len();
    Ok(DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else {
            let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
        }
    }))
}

fn validate<'a, S: AsRef<str>>(
    x: &str,
    y: &str,
    z: &'a [S],
) -> Result<BTreeSet<&'a str>, StatsError> {
    let given: BTreeSet<&str> = z.iter().map(AsRef::as_ref).collect();
    for e in [x, y] {
        if given.contains(e) {
            return Err(StatsError::EndpointConditioned(e.to_string()));
        }
    }
    Ok(given)
}

/// Gaussian partial correlation of `x` and `y` given `z`, from the
/// correlation matrix: `(R_xy - R_xZ R_ZZ^-1 R_Zy)` over the square root
/// of the two residual variances.
pub fn partial_correlation<S: AsRef<str>>(
    d: &Dataset,
    x: &str,
    y: &str,
    z: &[S],
) -> Result<f64, StatsError> {
    let given = validate(x, y, z)?;
    let mut cols = vec![column(d, x)?, column(d, y)?];
    for g in &given {
        cols.push(column(d, g)?);
    }
    let r = pearson_matrix(&cols)?;
    let k = given.len();
    if k == 0 {
        return Ok(r[(0, 1)]);
    }
    let rzz = r.view((2, 2), (k, k)).into_owned();
    let chol = rzz.cholesky().ok_or(StatsError::Singular)?;
    let rxz = DVector::from_fn(k, |i, _| r[(0, 2 + i)]);
    let ryz = DVector::from_fn(k, |i, _| r[(1, 2 + i)]);
    let sx = chol.solve(&rxz);
    let sy = chol.solve(&ryz);
    let vx = 1.0 - rxz.dot(&sx);
    let vy = 1.0 - ryz.dot(&sy);
    if vx <= 1e-12 || vy <= 1e-12 {
        return Err(StatsError::Singular);
    }
    Ok(((r[(0, 1)] - rxz.dot(&sy)) / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

/// Fisher-z test of zero partial correlation.
pub fn partial_correlation_ci_test<S: AsRef<str>>(
    d: &Dataset,
    x: &str,
    y: &str,
    z: &[S],
    alpha: f64,
) -> Result<TestReport, StatsError> {
    check_alpha(alpha)?;
    let given = validate(x, y, z)?;
    let n = d.n_rows();
    if n <= given.len() + 3 {
        return Err(StatsError::TooFew {
            needed: given.len() + 4,
            got: n,
        });
    }
    let rho = partial_correlation(d, x, y, z)?;
    let fisher = rho.atanh() * ((n - given.len() - 3) as f64).sqrt();
    let p = if fisher.is_finite() {
        2.0 * (1.0 - normal_cdf(fisher.abs()))
    } else {
        0.0
    };
    Ok(TestReport::from_p(
        "partial_correlation",
        rho,
        p,
        alpha,
        LevelTag::Structural(StructuralTag::Plausible),
        format!("Fisher z with n - |z| - 3 = {} degrees", n - given.len() - 3),
    ))
}
