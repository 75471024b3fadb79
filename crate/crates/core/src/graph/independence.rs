use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{GraphError, IntoVariable, Variable};

/// `x ⊥ y | given` when `holds`, `x ⊥̸ y | given` otherwise. Stored with
/// `x < y` so the pair is unordered.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "StatementRepr")]
pub struct IndependenceStatement {
    x: Variable,
    y: Variable,
    given: BTreeSet<Variable>,
    holds: bool,
}

#[derive(Deserialize)]
struct StatementRepr {
    x: Variable,
    y: Variable,
    #[serde(default)]
    given: BTreeSet<Variable>,
    holds: bool,
}

impl TryFrom<StatementRepr> for IndependenceStatement {
    type Error = GraphError;
    fn try_from(r: StatementRepr) -> Result<Self, Self::Error> {
        IndependenceStatement::new(r.x, r.y, r.given, r.holds)
    }
}

impl IndependenceStatement {
    pub fn new<X, Y, Z>(
        x: X,
        y: Y,
        given: impl IntoIterator<Item = Z>,
        holds: bool,
    ) -> Result<Self, GraphError>
    where
        X: IntoVariable,
        Y: IntoVariable,
        Z: IntoVariable,
    {
        let x = x.into_variable()?;
        let y = y.into_variable()?;
        if x == y {
            return Err(GraphError::SameEndpoints(x.to_string()));
        }
        let given = given
            .into_iter()
            .map(IntoVariable::into_variable)
            .collect::<Result<BTreeSet<_>, _>>()?;
        for end in [&x, &y] {
            if given.contains(end) {
                return Err(GraphError::EndpointConditioned(end.to_string()));
            }
        }
        Ok(Self::new_unchecked(x, y, given, holds))
    }

    pub(crate) fn new_unchecked(
        x: Variable,
        y: Variable,
        given: BTreeSet<Variable>,
        holds: bool,
    ) -> Self {
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        IndependenceStatement { x, y, given, holds }
    }

    pub fn x(&self) -> &Variable {
        &self.x
    }

    pub fn y(&self) -> &Variable {
        &self.y
    }

    pub fn given(&self) -> &BTreeSet<Variable> {
        &self.given
    }

    pub fn holds(&self) -> bool {
        self.holds
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        [&self.x, &self.y].into_iter().chain(self.given.iter())
    }
}

impl fmt::Display for IndependenceStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = if self.holds { "indep" } else { "dep" };
        write!(f, "{} {} {}", self.x, rel, self.y)?;
        if !self.given.is_empty() {
            let z: Vec<&str> = self.given.iter().map(|v| v.as_str()).collect();
            write!(f, " | {}", z.join(", "))?;
        }
        Ok(())
    }
}

type Key = (Variable, Variable, BTreeSet<Variable>);

/// A consistent set of (in)dependence statements: a triple appears at most
/// once, with a single verdict.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<IndependenceStatement>", into = "Vec<IndependenceStatement>")]
pub struct IndependenceSet {
    entries: BTreeMap<Key, bool>,
}

impl IndependenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a statement. Re-adding the same verdict is a no-op; adding its
    /// negation is an error.
    pub fn insert(&mut self, s: IndependenceStatement) -> Result<(), GraphError> {
        let verdict = s.holds;
        let display = s.to_string();
        let key = (s.x, s.y, s.given);
        match self.entries.get(&key) {
            Some(&existing) if existing != verdict => {
                Err(GraphError::InconsistentConstraints(display))
            }
            _ => {
                self.entries.insert(key, verdict);
                Ok(())
            }
        }
    }

    pub fn get<S: AsRef<str>>(&self, x: &str, y: &str, given: &[S]) -> Option<bool> {
        let x = Variable::new(x).ok()?;
        let y = Variable::new(y).ok()?;
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        let given = given
            .iter()
            .map(|g| Variable::new(g.as_ref()))
            .collect::<Result<BTreeSet<_>, _>>()
            .ok()?;
        self.entries.get(&(x, y, given)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn statements(&self) -> impl Iterator<Item = IndependenceStatement> + '_ {
        self.entries
            .iter()
            .map(|((x, y, g), &holds)| IndependenceStatement {
                x: x.clone(),
                y: y.clone(),
                given: g.clone(),
                holds,
            })
    }

    /// Every variable mentioned by any statement.
    pub fn variables(&self) -> BTreeSet<&Variable> {
        self.entries
            .keys()
            .flat_map(|(x, y, g)| [x, y].into_iter().chain(g.iter()))
            .collect()
    }

    /// Expands parsed constraint lines over `vars`, replacing a `*`
    /// conditioning set with every subset of the remaining variables.
    pub fn from_constraints(
        lines: &[ConstraintLine],
        vars: &[Variable],
    ) -> Result<Self, GraphError> {
        let known: BTreeSet<&Variable> = vars.iter().collect();
        let mut set = IndependenceSet::new();
        for line in lines {
            for v in [&line.x, &line.y] {
                if !known.contains(v) {
                    return Err(GraphError::UnknownVariable(v.to_string()));
                }
            }
            match &line.given {
                Conditioning::Set(z) => {
                    if let Some(v) = z.iter().find(|v| !known.contains(v)) {
                        return Err(GraphError::UnknownVariable(v.to_string()));
                    }
                    set.insert(IndependenceStatement::new(
                        &line.x,
                        &line.y,
                        z.iter(),
                        line.holds,
                    )?)?;
                }
                Conditioning::Any => {
                    let rest: Vec<&Variable> = known
                        .iter()
                        .copied()
                        .filter(|v| **v != line.x && **v != line.y)
                        .collect();
                    for bits in 0u64..(1u64 << rest.len()) {
                        let z = rest
                            .iter()
                            .enumerate()
                            .filter(|(k, _)| bits >> k & 1 == 1)
                            .map(|(_, v)| *v);
                        set.insert(IndependenceStatement::new(&line.x, &line.y, z, line.holds)?)?;
                    }
                }
            }
        }
        Ok(set)
    }
}

impl TryFrom<Vec<IndependenceStatement>> for IndependenceSet {
    type Error = GraphError;
    fn try_from(v: Vec<IndependenceStatement>) -> Result<Self, Self::Error> {
        let mut set = IndependenceSet::new();
        for s in v {
            set.insert(s)?;
        }
        Ok(set)
    }
}

impl From<IndependenceSet> for Vec<IndependenceStatement> {
    fn from(s: IndependenceSet) -> Self {
        s.statements().collect()
    }
}

impl fmt::Display for IndependenceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.statements() {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Conditioning {
    Set(BTreeSet<Variable>),
    /// Every subset of the variables other than the pair.
    Any,
}

/// One line of a constraint file, before `*` expansion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintLine {
    pub x: Variable,
    pub y: Variable,
    pub given: Conditioning,
    pub holds: bool,
}

/// Parses the constraint text format:
///
/// ```text
/// # smoking example
/// S indep D | C
/// S dep D
/// S dep C | *
/// ```
///
/// `indep` / `_||_` assert independence, `dep` / `!_||_` dependence. The
/// conditioning list after `|` is comma- or space-separated; `*` stands for
/// every subset of the other variables and `{}` for the empty set.
pub fn parse_constraints(text: &str) -> Result<Vec<ConstraintLine>, GraphError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: &str| GraphError::Parse {
            line: line_no,
            message: message.to_string(),
        };
        let (head, tail) = split_conditioning(line);
        let words: Vec<&str> = head.split_whitespace().collect();
        let [x, rel, y] = words[..] else {
            return Err(err("expected `<x> indep|dep <y> [| <given>]`"));
        };
        let holds = match rel {
            "indep" | "_||_" => true,
            "dep" | "!_||_" => false,
            other => return Err(err(&format!("unknown relation {other:?}"))),
        };
        let given = match tail.map(str::trim) {
            None | Some("") | Some("{}") => Conditioning::Set(BTreeSet::new()),
            Some("*") => Conditioning::Any,
            Some(list) => Conditioning::Set(
                list.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(Variable::new)
                    .collect::<Result<_, _>>()
                    .map_err(|e| err(&e.to_string()))?,
            ),
        };
        let x = Variable::new(x).map_err(|e| err(&e.to_string()))?;
        let y = Variable::new(y).map_err(|e| err(&e.to_string()))?;
        if x == y {
            return Err(err("pair endpoints must differ"));
        }
        if let Conditioning::Set(z) = &given {
            if z.contains(&x) || z.contains(&y) {
                return Err(err("an endpoint appears in the conditioning set"));
            }
        }
        out.push(ConstraintLine { x, y, given, holds });
    }
    Ok(out)
}

/// Splits `a REL b | z` on the conditioning bar, ignoring bars inside the
/// `_||_` relation token.
fn split_conditioning(line: &str) -> (&str, Option<&str>) {
    let masked = line.replace("_||_", "____");
    match masked.find('|') {
        Some(pos) => (&line[..pos], Some(&line[pos + 1..])),
        None => (line, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statement_is_unordered() {
        let a = IndependenceStatement::new("S", "D", ["C"], true).unwrap();
        let b = IndependenceStatement::new("D", "S", ["C"], true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "D indep S | C");
    }

    #[test]
    fn statement_preconditions() {
        assert!(IndependenceStatement::new("S", "S", Vec::<&str>::new(), true).is_err());
        assert!(IndependenceStatement::new("S", "D", ["S"], true).is_err());
    }

    #[test]
    fn set_rejects_negation_and_dedupes() {
        let mut set = IndependenceSet::new();
        set.insert(IndependenceStatement::new("S", "D", ["C"], true).unwrap())
            .unwrap();
        set.insert(IndependenceStatement::new("D", "S", ["C"], true).unwrap())
            .unwrap();
        assert_eq!(set.len(), 1);
        let err = set
            .insert(IndependenceStatement::new("S", "D", ["C"], false).unwrap())
            .unwrap_err();
        assert!(matches!(err, GraphError::InconsistentConstraints(_)));
    }

    #[test]
    fn parses_constraint_file_and_expands_wildcards() {
        let text = "# smoking\nS indep D | C\nS dep D\nS dep C | *\nC !_||_ D | *\n";
        let lines = parse_constraints(text).unwrap();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[2].given, Conditioning::Any);
        let vars: Vec<Variable> = ["C", "D", "S"].map(|v| Variable::new(v).unwrap()).into();
        let set = IndependenceSet::from_constraints(&lines, &vars).unwrap();
        assert_eq!(set.len(), 6);
        assert_eq!(set.get::<&str>("C", "S", &["D"]), Some(false));
        assert_eq!(set.get::<&str>("C", "D", &[]), Some(false));
        assert_eq!(set.get::<&str>("S", "D", &["C"]), Some(true));
    }

    #[test]
    fn underscore_relation_with_conditioning() {
        let lines = parse_constraints("A _||_ B | C, D").unwrap();
        assert!(lines[0].holds);
        let Conditioning::Set(z) = &lines[0].given else {
            panic!("expected explicit set");
        };
        assert_eq!(z.len(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_constraints("A indep B\nA maybe B").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }));
        assert!(parse_constraints("A indep B | A").is_err());
    }

    #[test]
    fn unknown_variables_in_constraints() {
        let lines = parse_constraints("A indep Q").unwrap();
        let vars = vec![Variable::new("A").unwrap(), Variable::new("B").unwrap()];
        assert_eq!(
            IndependenceSet::from_constraints(&lines, &vars),
            Err(GraphError::UnknownVariable("Q".into()))
        );
    }

    #[test]
    fn json_shape() {
        let mut set = IndependenceSet::new();
        set.insert(IndependenceStatement::new("S", "D", ["C"], true).unwrap())
            .unwrap();
        let json = serde_json::to_string(&set).unwrap();
        assert_eq!(json, r#"[{"x":"D","y":"S","given":["C"],"holds":true}]"#);
        let back: IndependenceSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
        let bad = r#"[{"x":"D","y":"S","holds":true},{"x":"S","y":"D","holds":false}]"#;
        assert!(serde_json::from_str::<IndependenceSet>(bad).is_err());
    }
}
