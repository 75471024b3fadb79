use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{noise_symbol, EquationForm, Scm, ScmError};
use crate::data::Dataset;
use crate::graph::Variable;

/// Name of the control potential outcome read by [`oracle_cate`].
pub const CONTROL_OUTCOME: &str = "Y0";
/// Name of the treated potential outcome read by [`oracle_cate`].
pub const TREATED_OUTCOME: &str = "Y1";

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Independent generator for one variable's noise, so draws for one
/// variable do not depend on which other variables exist.
fn noise_stream(seed: u64, var: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(var));
    rng
}

/// Ancestral simulation with some variables held fixed. Returns one column
/// per graph node, in node order.
fn simulate(
    m: &Scm,
    n: usize,
    seed: u64,
    fixed: &BTreeMap<&str, f64>,
) -> Result<Vec<(Variable, Vec<f64>)>, ScmError> {
    let g = m.graph();
    let mut cols: Vec<Option<Vec<f64>>> = vec![None; g.len()];
    for v in g.topological_order() {
        let idx = g.index_of(v.as_str()).expect("node");
        if let Some(&x) = fixed.get(v.as_str()) {
            cols[idx] = Some(vec![x; n]);
            continue;
        }
        let noise: Option<Vec<f64>> = m.noise(v.as_str()).map(|spec| {
            let mut rng = noise_stream(seed, v.as_str());
            (0..n).map(|_| spec.sample(&mut rng)).collect()
        });
        let eq = match m.equation(v.as_str()) {
            None => {
                cols[idx] = Some(noise.expect("exogenous nodes carry noise"));
                continue;
            }
            Some(eq) => eq,
        };
        let parents: Vec<(&str, &Vec<f64>)> = eq
            .parents()
            .iter()
            .map(|p| {
                let pi = g.index_of(p.as_str()).expect("parent");
                (p.as_str(), cols[pi].as_ref().expect("parents come first"))
            })
            .collect();
        let u = noise_symbol(v.as_str());
        let mut out = Vec::with_capacity(n);
        for row in 0..n {
            let lookup = |name: &str| {
                if name == u {
                    return noise.as_ref().map(|c| c[row]);
                }
                parents.iter().find(|(p, _)| *p == name).map(|(_, c)| c[row])
            };
            let value = match eq.form() {
                EquationForm::Descriptive(tag) => {
                    return Err(ScmError::Unsampleable {
                        target: v.to_string(),
                        level: *tag,
                    })
                }
                EquationForm::Additive(gf) => {
                    gf.evaluate_with(&lookup)? + noise.as_ref().expect("validated")[row]
                }
                EquationForm::Closed(f) => f.evaluate_with(&lookup)?,
            };
            if !value.is_finite() {
                return Err(ScmError::NonFinite {
                    target: v.to_string(),
                    row: row + 1,
                });
            }
            out.push(value);
        }
        cols[idx] = Some(out);
    }
    Ok(g.nodes()
        .iter()
        .cloned()
        .zip(cols.into_iter().map(|c| c.expect("every node visited")))
        .collect())
}

/// Draws `n` rows by ancestral sampling. The same `(m, n, seed)` always
/// yields the same dataset.
pub fn sample_scm(m: &Scm, n: usize, seed: u64) -> Result<Dataset, ScmError> {
    if n == 0 {
        return Err(ScmError::ZeroRows);
    }
    for eq in m.equations() {
        if let EquationForm::Descriptive(tag) = eq.form() {
            return Err(ScmError::Unsampleable {
                target: eq.target().to_string(),
                level: *tag,
            });
        }
    }
    let cols = simulate(m, n, seed, &BTreeMap::new())?;
    Ok(Dataset::new(cols).expect("columns are finite and aligned"))
}

/// IHDP-style response surfaces: `mu0 = exp((x + m) . beta)` and
/// `mu1 = x . beta + omega`.
pub fn ihdp_surfaces(x: &[f64], m: &[f64], beta: &[f64], omega: f64) -> Result<(f64, f64), ScmError> {
    if x.len() != m.len() || x.len() != beta.len() {
        return Err(ScmError::LengthMismatch(format!(
            "x has {}, m has {}, beta has {} entries",
            x.len(),
            m.len(),
            beta.len()
        )));
    }
    let xm: f64 = x.iter().zip(m).zip(beta).map(|((a, b), c)| (a + b) * c).sum();
    let xb: f64 = x.iter().zip(beta).map(|(a, c)| a * c).sum();
    Ok((xm.exp(), xb + omega))
}

/// Whether `v` varies with the noise once the variables in `fixed` are held.
fn depends_on_noise(m: &Scm, v: &str, fixed: &BTreeMap<&str, f64>) -> bool {
    if fixed.contains_key(v) {
        return false;
    }
    match m.equation(v) {
        None => true,
        Some(eq) => {
            eq.uses_noise()
                || eq
                    .parents()
                    .iter()
                    .any(|p| depends_on_noise(m, p.as_str(), fixed))
        }
    }
}

/// `E[Y1 - Y0 | x]` for the potential outcomes named [`TREATED_OUTCOME`]
/// and [`CONTROL_OUTCOME`]. Covariates in `x` are held at their values and
/// both outcomes see the same upstream noise in each replicate. When neither
/// outcome depends on noise the answer is computed exactly from one pass.
pub fn oracle_cate(
    m: &Scm,
    x: &HashMap<String, f64>,
    n_mc: usize,
    seed: u64,
) -> Result<f64, ScmError> {
    for name in [CONTROL_OUTCOME, TREATED_OUTCOME] {
        if m.equation(name).is_none() {
            return Err(ScmError::MissingOutcome(name.to_string()));
        }
    }
    if n_mc == 0 {
        return Err(ScmError::ZeroRows);
    }
    let mut fixed = BTreeMap::new();
    for (k, v) in x {
        if !m.graph().contains(k) {
            return Err(ScmError::MissingVariable(k.clone()));
        }
        fixed.insert(k.as_str(), *v);
    }
    let noisy = depends_on_noise(m, CONTROL_OUTCOME, &fixed)
        || depends_on_noise(m, TREATED_OUTCOME, &fixed);
    let reps = if noisy { n_mc } else { 1 };
    let cols = simulate(m, reps, seed, &fixed)?;
    let col = |name: &str| {
        &cols
            .iter()
            .find(|(v, _)| v.as_str() == name)
            .expect("outcome checked above")
            .1
    };
    let (y0, y1) = (col(CONTROL_OUTCOME), col(TREATED_OUTCOME));
    let total: f64 = y1.iter().zip(y0).map(|(a, b)| a - b).sum();
    Ok(total / reps as f64)
}
