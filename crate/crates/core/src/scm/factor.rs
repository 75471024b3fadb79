use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{Expression, ScmError};
use crate::graph::{Dag, Variable};

/// Value space of one variable inside a factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// The integers `0..k`.
    Finite(usize),
    /// A real interval; unbounded ends are infinite.
    Real { lo: f64, hi: f64 },
}

impl Domain {
    fn contains(&self, v: f64) -> bool {
        match *self {
            Domain::Finite(k) => v >= 0.0 && v.fract() == 0.0 && (v as usize) < k,
            Domain::Real { lo, hi } => v >= lo && v <= hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorValues {
    /// Row-major over the scope's finite domains; the last variable varies
    /// fastest.
    Table(Vec<f64>),
    Expr(Expression),
}

/// A non-negative function over the joint values of its scope.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<(Variable, Domain)>,
    values: FactorValues,
}

impl Factor {
    pub fn table(scope: Vec<(Variable, Domain)>, table: Vec<f64>) -> Result<Self, ScmError> {
        let mut size = 1usize;
        for (v, d) in &scope {
            match d {
                Domain::Finite(k) if *k > 0 => size *= k,
                _ => {
                    return Err(ScmError::Factor(format!(
                        "table factor needs a nonempty finite domain for {v}"
                    )))
                }
            }
        }
        if table.len() != size {
            return Err(ScmError::Factor(format!(
                "table has {} entries, scope needs {size}",
                table.len()
            )));
        }
        if let Some(bad) = table.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(ScmError::NegativeFactor(*bad));
        }
        Self::build(scope, FactorValues::Table(table))
    }

    /// An expression factor; it may reference only scope variables.
    /// Non-negativity is checked whenever the factor is evaluated.
    pub fn expression(scope: Vec<(Variable, Domain)>, expr: Expression) -> Result<Self, ScmError> {
        for name in expr.variables() {
            if !scope.iter().any(|(v, _)| v.as_str() == name) {
                return Err(ScmError::Factor(format!(
                    "expression references {name:?} outside the scope"
                )));
            }
        }
        Self::build(scope, FactorValues::Expr(expr))
    }

    fn build(scope: Vec<(Variable, Domain)>, values: FactorValues) -> Result<Self, ScmError> {
        if scope.is_empty() {
            return Err(ScmError::Factor("factor scope is empty".into()));
        }
        let names: BTreeSet<&Variable> = scope.iter().map(|(v, _)| v).collect();
        if names.len() != scope.len() {
            return Err(ScmError::Factor("factor scope repeats a variable".into()));
        }
        Ok(Factor { scope, values })
    }

    pub fn scope(&self) -> impl Iterator<Item = &Variable> {
        self.scope.iter().map(|(v, _)| v)
    }

    pub fn domains(&self) -> &[(Variable, Domain)] {
        &self.scope
    }

    pub fn value(&self, assignment: &HashMap<Variable, f64>) -> Result<f64, ScmError> {
        let mut vals = Vec::with_capacity(self.scope.len());
        for (v, d) in &self.scope {
            let x = *assignment
                .get(v)
                .ok_or_else(|| ScmError::MissingVariable(v.to_string()))?;
            if !d.contains(x) {
                return Err(ScmError::Factor(format!("{v} = {x} is outside its domain")));
            }
            vals.push(x);
        }
        let out = match &self.values {
            FactorValues::Table(t) => {
                let mut idx = 0usize;
                for ((_, d), x) in self.scope.iter().zip(&vals) {
                    let Domain::Finite(k) = d else { unreachable!() };
                    idx = idx * k + *x as usize;
                }
                t[idx]
            }
            FactorValues::Expr(e) => {
                let lookup = |name: &str| {
                    self.scope
                        .iter()
                        .position(|(v, _)| v.as_str() == name)
                        .map(|i| vals[i])
                };
                e.evaluate_with(&lookup)?
            }
        };
        if out < 0.0 {
            return Err(ScmError::NegativeFactor(out));
        }
        Ok(out)
    }
}

/// `p(X) = (1/z) * prod_i f_i(Scope[f_i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    factors: Vec<Factor>,
    z: f64,
}

/// Joint domains above this many cells are not summed during validation.
const NORMALIZATION_CELL_LIMIT: usize = 1 << 20;

/// Tolerance for the sum-to-one check on finite domains.
pub const NORMALIZATION_TOL: f64 = 1e-12;

impl Factorization {
    /// Validates `z > 0`, agreeing domains for shared variables and, when
    /// every domain is finite and small, that the product sums to one.
    pub fn new(factors: Vec<Factor>, z: f64) -> Result<Self, ScmError> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(ScmError::Factor(format!("normalizer must be positive, got {z}")));
        }
        let f = Factorization { factors, z };
        let domains = f.joint_domains()?;
        let finite: Option<Vec<usize>> = domains
            .values()
            .map(|d| match d {
                Domain::Finite(k) => Some(*k),
                Domain::Real { .. } => None,
            })
            .collect();
        if let Some(sizes) = finite {
            let cells = sizes.iter().try_fold(1usize, |a, &k| a.checked_mul(k));
            if matches!(cells, Some(c) if c <= NORMALIZATION_CELL_LIMIT) {
                let total = f.total_mass()?;
                if (total - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(ScmError::Factor(format!(
                        "factorization sums to {total}, not 1"
                    )));
                }
            }
        }
        Ok(f)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    fn joint_domains(&self) -> Result<BTreeMap<Variable, Domain>, ScmError> {
        let mut out = BTreeMap::new();
        for f in &self.factors {
            for (v, d) in f.domains() {
                if let Some(prev) = out.insert(v.clone(), *d) {
                    if prev != *d {
                        return Err(ScmError::Factor(format!("{v} has two different domains")));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Sum of the normalized product over the whole joint domain. Every
    /// domain must be finite.
    pub fn total_mass(&self) -> Result<f64, ScmError> {
        let domains = self.joint_domains()?;
        let mut vars = Vec::new();
        let mut sizes = Vec::new();
        for (v, d) in domains {
            let Domain::Finite(k) = d else {
                return Err(ScmError::Factor(format!("{v} has a continuous domain")));
            };
            vars.push(v);
            sizes.push(k);
        }
        let mut digits = vec![0usize; vars.len()];
        let mut total = 0.0;
        let mut assignment = HashMap::new();
        loop {
            for (v, &x) in vars.iter().zip(&digits) {
                assignment.insert(v.clone(), x as f64);
            }
            total += self.evaluate(&assignment)?;
            let mut i = vars.len();
            loop {
                if i == 0 {
                    return Ok(total);
                }
                i -= 1;
                digits[i] += 1;
                if digits[i] < sizes[i] {
                    break;
                }
                digits[i] = 0;
            }
        }
    }

    pub fn evaluate(&self, assignment: &HashMap<Variable, f64>) -> Result<f64, ScmError> {
        let mut p = 1.0;
        for f in &self.factors {
            p *= f.value(assignment)?;
        }
        Ok(p / self.z)
    }

    /// True iff the scopes are exactly `{X} ∪ Pa(X)`, one factor per node.
    pub fn scopes_consistent_with_dag(&self, g: &Dag) -> Result<bool, ScmError> {
        let mut covered = BTreeSet::new();
        for f in &self.factors {
            let scope: BTreeSet<&str> = f.scope().map(Variable::as_str).collect();
            for v in &scope {
                if !g.contains(v) {
                    return Err(ScmError::MissingVariable(v.to_string()));
                }
            }
            let owner = g.nodes().iter().find(|x| {
                let mut family: BTreeSet<&str> = g
                    .parents_of(x.as_str())
                    .expect("node of g")
                    .into_iter()
                    .map(Variable::as_str)
                    .collect();
                family.insert(x.as_str());
                family == scope
            });
            match owner {
                Some(x) if covered.insert(x.clone()) => {}
                _ => return Ok(false),
            }
        }
        Ok(covered.len() == g.len())
    }
}

pub fn evaluate_factorization(
    f: &Factorization,
    assignment: &HashMap<Variable, f64>,
) -> Result<f64, ScmError> {
    f.evaluate(assignment)
}

pub fn scopes_consistent_with_dag(f: &Factorization, g: &Dag) -> Result<bool, ScmError> {
    f.scopes_consistent_with_dag(g)
}
