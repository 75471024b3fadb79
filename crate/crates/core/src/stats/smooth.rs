use nalgebra::DMatrix;

use super::{check_finite, StatsError};

/// Savitzky-Golay smoothing: each point is replaced by the value of the local
/// least-squares polynomial of `degree` over `window` neighbours. Near the
/// ends the window is shifted inward and the fit is evaluated at the
/// point's own offset.
pub fn savitzky_golay_smooth(y: &[f64], window: usize, degree: usize) -> Result<Vec<f64>, StatsError> {
    if window.is_multiple_of(2) {
        return Err(StatsError::EvenWindow(window));
    }
    if window < 3 || window > y.len() {
        return Err(StatsError::WindowSize {
            window,
            len: y.len(),
        });
    }
    if degree >= window {
        return Err(StatsError::DegreeTooHigh { degree, window });
    }
    check_finite(y)?;
    let half = window / 2;
    // Offsets scaled to [-1, 1] keep the Vandermonde matrix well conditioned.
    let scaled = |j: usize| (j as f64 - half as f64) / half as f64;
    let a = DMatrix::from_fn(window, degree + 1, |j, p| scaled(j).powi(p as i32));
    let pinv = a
        .pseudo_inverse(1e-12)
        .expect("pseudo-inverse of a real matrix");
    // weights[j] gives the fitted value at window position j.
    let weights: Vec<Vec<f64>> = (0..window)
        .map(|j| {
            let t = scaled(j);
            (0..window)
                .map(|col| (0..=degree).map(|p| t.powi(p as i32) * pinv[(p, col)]).sum())
                .collect()
        })
        .collect();
    let n = y.len();
    Ok((0..n)
        .map(|i| {
            let start = i.saturating_sub(half).min(n - window);
            let w = &weights[i - start];
            w.iter().zip(&y[start..start + window]).map(|(a, b)| a * b).sum()
        })
        .collect())
}
