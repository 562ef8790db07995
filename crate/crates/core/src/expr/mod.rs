//! Scalar expression trees over the state variables `x1..xn` and time `t`.
//!
//! Expressions are produced by [`parse_expression`], evaluated with
//! [`Expr::evaluate`], and differentiated symbolically with
//! [`Expr::differentiate`]. They are immutable once built and can be shared
//! freely between worker threads.
//!
//! State variables are stored with 0-based indices and displayed 1-based, so
//! `Expr::State(0)` prints as `x1`.

mod diff;
mod eval;
mod parse;
mod simplify;

use std::fmt;

pub use diff::total_time_derivative;
pub use eval::{DomainErrorKind, EvalError};
pub use parse::{parse_expression, ParseError};

use crate::region::SamplePoint;

/// Absolute tolerance below which a sampled value counts as zero.
pub const DEFAULT_ZERO_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// 0-based state index.
    State(usize),
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// 0-based state variable.
    State(usize),
    Time,
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Power with a constant exponent.
    Pow(Box<Expr>, f64),
}

/// The right-hand side `f` of `dx/dt = f(x, t)`, one expression per node.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSpec {
    n: usize,
    f: Vec<Expr>,
    modules: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DynamicsError {
    #[error("expected {expected} right-hand sides, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("system dimension must be positive")]
    EmptySystem,
    #[error("f{index} references x{var} but the system has only {n} states")]
    VariableOutOfRange { index: usize, var: usize, n: usize },
    #[error("module partition is invalid: {0}")]
    BadPartition(String),
}

impl DynamicsSpec {
    pub fn new(f: Vec<Expr>) -> Result<Self, DynamicsError> {
        let n = f.len();
        if n == 0 {
            return Err(DynamicsError::EmptySystem);
        }
        for (i, e) in f.iter().enumerate() {
            if let Some(k) = e.max_state() {
                if k >= n {
                    return Err(DynamicsError::VariableOutOfRange {
                        index: i + 1,
                        var: k + 1,
                        n,
                    });
                }
            }
        }
        Ok(Self { n, f, modules: None })
    }

    /// Parses one expression per node.
    pub fn parse<S: AsRef<str>>(f: &[S]) -> Result<Self, ParseError> {
        let n = f.len();
        let exprs = f
            .iter()
            .map(|s| parse_expression(s.as_ref(), n))
            .collect::<Result<Vec<_>, _>>()?;
        // parse_expression already range-checks every variable.
        Ok(Self::new(exprs).expect("parsed expressions are in range"))
    }

    /// Attaches a module partition given as 0-based index blocks.
    pub fn with_modules(mut self, modules: Vec<Vec<usize>>) -> Result<Self, DynamicsError> {
        let mut seen = vec![false; self.n];
        for block in &modules {
            if block.is_empty() {
                return Err(DynamicsError::BadPartition("empty module".into()));
            }
            for &k in block {
                if k >= self.n {
                    return Err(DynamicsError::BadPartition(format!(
                        "index {} exceeds dimension {}",
                        k + 1,
                        self.n
                    )));
                }
                if std::mem::replace(&mut seen[k], true) {
                    return Err(DynamicsError::BadPartition(format!(
                        "x{} appears in more than one module",
                        k + 1
                    )));
                }
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(DynamicsError::BadPartition(format!(
                "x{} is not covered by any module",
                k + 1
            )));
        }
        self.modules = Some(modules);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rhs(&self) -> &[Expr] {
        &self.f
    }

    pub fn modules(&self) -> Option<&[Vec<usize>]> {
        self.modules.as_deref()
    }

    /// Symbolic Jacobian, `jacobian()[i][j] = d f_i / d x_j`, simplified.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        self.f
            .iter()
            .map(|fi| {
                (0..self.n)
                    .map(|j| fi.differentiate(Var::State(j)).simplify())
                    .collect()
            })
            .collect()
    }

    /// Evaluates every right-hand side at `(x, t)` into `out`.
    pub fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<(), EvalError> {
        for (o, fi) in out.iter_mut().zip(&self.f) {
            *o = fi.evaluate(x, t)?;
        }
        Ok(())
    }
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn x(k: usize) -> Self {
        Expr::State(k)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    /// Largest 0-based state index referenced, if any.
    pub fn max_state(&self) -> Option<usize> {
        match self {
            Expr::State(k) => Some(*k),
            Expr::Const(_) | Expr::Time => None,
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.max_state(),
            Expr::Binary(_, a, b) => match (a.max_state(), b.max_state()) {
                (Some(p), Some(q)) => Some(p.max(q)),
                (p, q) => p.or(q),
            },
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::State(k) => var == Var::State(*k),
            Expr::Time => var == Var::Time,
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.depends_on(var),
            Expr::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// True when the expression references no state variable and no time.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::State(_) | Expr::Time => false,
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.is_constant(),
            Expr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Sampling test for identical vanishing.
    ///
    /// An expression that simplifies to the constant zero is reported zero
    /// without evaluation. Otherwise it is zero iff `|e| < tol` at every
    /// point.
    pub fn is_identically_zero(&self, points: &[SamplePoint], tol: f64) -> Result<bool, EvalError> {
        let s = self.simplify();
        if s.is_zero() {
            return Ok(true);
        }
        if let Some(c) = s.as_const() {
            return Ok(c.abs() < tol);
        }
        for p in points {
            if s.evaluate(&p.x, p.t)?.abs() >= tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

// Smart constructors. They fold constants and apply 0/1 identities locally so
// that derivative trees stay small, and they never reorder operands: the value
// of `add(a, b)` is always computed as `a + b`.

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Unary(UnaryOp::Neg, inner) => *inner,
        a => Expr::Unary(UnaryOp::Neg, Box::new(a)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (a, b) if a.is_zero() => b,
        (a, b) if b.is_zero() => a,
        (a, b) => Expr::Binary(BinaryOp::Add, Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (a, b) if b.is_zero() => a,
        (a, b) if a.is_zero() => neg(b),
        (a, b) => Expr::Binary(BinaryOp::Sub, Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (a, _) if a.is_zero() => Expr::Const(0.0),
        (_, b) if b.is_zero() => Expr::Const(0.0),
        (a, b) if a.is_one() => b,
        (a, b) if b.is_one() => a,
        (a, b) => Expr::Binary(BinaryOp::Mul, Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) if y != 0.0 => Expr::Const(x / y),
        (a, b) if a.is_zero() && !b.is_zero() => Expr::Const(0.0),
        (a, b) if b.is_one() => a,
        (a, b) => Expr::Binary(BinaryOp::Div, Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, c: f64) -> Expr {
    if c == 0.0 {
        return Expr::Const(1.0);
    }
    if c == 1.0 {
        return a;
    }
    match a {
        Expr::Const(x) if x.powf(c).is_finite() => Expr::Const(x.powf(c)),
        a => Expr::Pow(Box::new(a), c),
    }
}

pub fn unary(op: UnaryOp, a: Expr) -> Expr {
    if op == UnaryOp::Neg {
        return neg(a);
    }
    if let Expr::Const(c) = a {
        let v = eval::apply_unary(op, c);
        if let Ok(v) = v {
            return Expr::Const(v);
        }
    }
    Expr::Unary(op, Box::new(a))
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Ln => "ln",
            UnaryOp::Sqrt => "sqrt",
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::State(k) => write!(f, "x{}", k + 1),
            Var::Time => f.write_str("t"),
        }
    }
}

// Binding strength used to decide where parentheses are needed.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
        Expr::Unary(UnaryOp::Neg, _) => 3,
        Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::State(k) => write!(f, "x{}", k + 1),
            Expr::Time => f.write_str("t"),
            Expr::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                write_operand(f, a, 3)
            }
            Expr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            // The parser reads `a - b` as `a + (-b)`; print it back the same way.
            Expr::Binary(BinaryOp::Add, a, b) if matches!(**b, Expr::Unary(UnaryOp::Neg, _)) => {
                let Expr::Unary(_, inner) = &**b else { unreachable!() };
                write_operand(f, a, 1)?;
                f.write_str(" - ")?;
                write_operand(f, inner, 2)
            }
            Expr::Binary(op, a, b) => {
                let (sym, lhs_min, rhs_min) = match op {
                    BinaryOp::Add => (" + ", 1, 1),
                    BinaryOp::Sub => (" - ", 1, 2),
                    BinaryOp::Mul => ("*", 2, 3),
                    BinaryOp::Div => ("/", 2, 3),
                };
                write_operand(f, a, lhs_min)?;
                f.write_str(sym)?;
                write_operand(f, b, rhs_min)
            }
            Expr::Pow(a, c) => {
                write_operand(f, a, 5)?;
                if *c < 0.0 {
                    write!(f, "^({c})")
                } else {
                    write!(f, "^{c}")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_round_trips_through_parser() {
        for src in [
            "-x1 - x1*x2",
            "x1^2 - x2 - x2*x3",
            "1 + 0.9*sin(t)",
            "x1/(x2*x3)",
            "-(x1 + x2)^2",
            "exp(-t)*sqrt(x1)",
            "x1^(-1)",
        ] {
            let e = parse_expression(src, 3).unwrap();
            let again = parse_expression(&e.to_string(), 3).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }

    #[test]
    fn smart_constructors_fold() {
        assert_eq!(add(Expr::Const(2.0), Expr::Const(3.0)), Expr::Const(5.0));
        assert_eq!(mul(Expr::Const(0.0), Expr::x(0)), Expr::Const(0.0));
        assert_eq!(mul(Expr::Const(1.0), Expr::x(0)), Expr::x(0));
        assert_eq!(neg(neg(Expr::x(1))), Expr::x(1));
        assert_eq!(pow(Expr::x(0), 1.0), Expr::x(0));
        assert_eq!(sub(Expr::Const(0.0), Expr::x(0)), neg(Expr::x(0)));
    }

    #[test]
    fn dynamics_rejects_bad_partitions() {
        let dyn_ = DynamicsSpec::parse(&["-x1", "-x2", "-x3"]).unwrap();
        assert!(dyn_.clone().with_modules(vec![vec![0], vec![1, 2]]).is_ok());
        assert!(dyn_.clone().with_modules(vec![vec![0], vec![0, 1, 2]]).is_err());
        assert!(dyn_.clone().with_modules(vec![vec![0, 1]]).is_err());
        assert!(dyn_.with_modules(vec![vec![0, 1, 2], vec![]]).is_err());
    }

    #[test]
    fn jacobian_of_example_one() {
        let d = DynamicsSpec::parse(&["-x1 - x1*x2", "x1^2 - x2 - x2*x3", "x2^2 - x3"]).unwrap();
        let j = d.jacobian();
        assert_eq!(j[0][1], parse_expression("-x1", 3).unwrap());
        assert_eq!(j[1][0], parse_expression("2*x1", 3).unwrap());
        assert!(j[0][2].is_zero());
        assert_eq!(j[2][2], Expr::Const(-1.0));
    }
}
