use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function {name:?} at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("division by literal zero at byte {offset}")]
    DivisionByZeroLiteral { offset: usize },
    #[error("unbound identifier {0:?}")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sin" => Some(Func::Sin),
            _ => None,
        }
    }
}

/// Closed-form expression AST.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Num(f64),
    Var(String),
    Neg(Box<Expression>),
    Bin(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Box<Expression>),
}

const NEG_PREC: u8 = 3;
const ATOM_PREC: u8 = 5;

impl Expression {
    pub fn num(v: f64) -> Self {
        Expression::Num(v)
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expression::Var(name.into())
    }

    pub fn bin(op: BinOp, l: Expression, r: Expression) -> Self {
        Expression::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn call(f: Func, arg: Expression) -> Self {
        Expression::Call(f, Box::new(arg))
    }

    /// Every identifier referenced, sorted.
    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expression::Num(_) => {}
            Expression::Var(v) => {
                out.insert(v);
            }
            Expression::Neg(e) | Expression::Call(_, e) => e.collect_vars(out),
            Expression::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    /// Replaces identifiers according to `f`; unmapped names are kept.
    pub fn rename(&self, f: &impl Fn(&str) -> Option<String>) -> Expression {
        match self {
            Expression::Num(v) => Expression::Num(*v),
            Expression::Var(v) => Expression::Var(f(v).unwrap_or_else(|| v.clone())),
            Expression::Neg(e) => Expression::Neg(Box::new(e.rename(f))),
            Expression::Call(func, e) => Expression::Call(*func, Box::new(e.rename(f))),
            Expression::Bin(op, l, r) => Expression::bin(*op, l.rename(f), r.rename(f)),
        }
    }

    pub fn evaluate(&self, env: &HashMap<String, f64>) -> Result<f64, ExprError> {
        self.evaluate_with(&|name| env.get(name).copied())
    }

    pub fn evaluate_with(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, ExprError> {
        let v = match self {
            Expression::Num(v) => *v,
            Expression::Var(name) => lookup(name).ok_or_else(|| ExprError::Unbound(name.clone()))?,
            Expression::Neg(e) => -e.evaluate_with(lookup)?,
            Expression::Call(f, e) => {
                let a = e.evaluate_with(lookup)?;
                match f {
                    Func::Exp => a.exp(),
                    Func::Sin => a.sin(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(ExprError::Domain(format!("log of {a}")));
                        }
                        a.ln()
                    }
                }
            }
            Expression::Bin(op, l, r) => {
                let a = l.evaluate_with(lookup)?;
                let b = r.evaluate_with(lookup)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(ExprError::Domain(format!("division of {a} by zero")));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
        };
        if v.is_nan() {
            return Err(ExprError::Domain(format!("{self} is undefined here")));
        }
        Ok(v)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expression::Num(v) if v.is_sign_negative() => NEG_PREC,
            Expression::Num(_) | Expression::Var(_) | Expression::Call(..) => ATOM_PREC,
            Expression::Neg(_) => NEG_PREC,
            Expression::Bin(op, ..) => op.precedence(),
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Canonical form: minimal parentheses, single spaces around binary
/// operators other than `^`.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Num(v) => write!(f, "{v}"),
            Expression::Var(v) => f.write_str(v),
            Expression::Neg(e) => {
                f.write_str("-")?;
                e.write_child(f, e.precedence() < NEG_PREC)
            }
            Expression::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expression::Bin(BinOp::Pow, l, r) => {
                l.write_child(f, l.precedence() <= BinOp::Pow.precedence())?;
                f.write_str("^")?;
                r.write_child(f, r.precedence() < NEG_PREC)
            }
            Expression::Bin(op, l, r) => {
                let p = op.precedence();
                l.write_child(f, l.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                r.write_child(f, r.precedence() <= p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Pow,
    LParen,
    RParen,
}

fn describe(t: Option<&Tok>) -> String {
    match t {
        None => "end of input".into(),
        Some(Tok::Num(v)) => format!("number {v}"),
        Some(Tok::Ident(s)) => format!("identifier {s:?}"),
        Some(Tok::Plus) => "'+'".into(),
        Some(Tok::Minus) => "'-'".into(),
        Some(Tok::Star) => "'*'".into(),
        Some(Tok::Slash) => "'/'".into(),
        Some(Tok::Pow) => "power operator".into(),
        Some(Tok::LParen) => "'('".into(),
        Some(Tok::RParen) => "')'".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'/' => Tok::Slash,
            b'^' => Tok::Pow,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'*' if bytes.get(i + 1) == Some(&b'*') => {
                i += 1;
                Tok::Pow
            }
            b'*' => Tok::Star,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number {lit:?}"),
                })?;
                if !v.is_finite() {
                    return Err(ExprError::Syntax {
                        offset: start,
                        message: format!("number {lit:?} is out of range"),
                    });
                }
                out.push((start, Tok::Num(v)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: i,
                    message: format!("unexpected character {ch:?}"),
                });
            }
        };
        i += 1;
        out.push((start, tok));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn unexpected(&self, wanted: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            message: format!("expected {wanted}, found {}", describe(self.peek())),
        }
    }

    fn expr(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expression::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let at = self.offset();
            let rhs = self.unary()?;
            if op == BinOp::Div && is_literal_zero(&rhs) {
                return Err(ExprError::DivisionByZeroLiteral { offset: at });
            }
            lhs = Expression::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expression, ExprError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return Ok(Expression::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Pow) {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expression::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expression, ExprError> {
        let at = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expression::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() != Some(&Tok::LParen) {
                    return Ok(Expression::Var(name));
                }
                let func = Func::lookup(&name).ok_or(ExprError::UnknownFunction {
                    name: name.clone(),
                    offset: at,
                })?;
                self.pos += 1;
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(Expression::call(func, arg))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            _ => Err(self.unexpected("a number, identifier or '('")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected("')'"))
        }
    }
}

fn is_literal_zero(e: &Expression) -> bool {
    match e {
        Expression::Num(v) => *v == 0.0,
        Expression::Neg(inner) => is_literal_zero(inner),
        _ => false,
    }
}

/// Parses an arithmetic expression.
///
/// Precedence from loosest to tightest: `+ -`, then `* /`, then unary minus,
/// then the right-associative power operator (`^` or `**`). So `-x^2` is
/// `-(x^2)` and `2^-1` is `2^(-1)`.
pub fn parse_expression(text: &str) -> Result<Expression, ExprError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

impl std::str::FromStr for Expression {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}
