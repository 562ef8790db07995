use std::fmt;

use serde::Serialize;

use super::{BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainErrorKind {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    InvalidPower,
    NonFinite,
    MissingVariable,
}

impl fmt::Display for DomainErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainErrorKind::DivisionByZero => "division by zero",
            DomainErrorKind::LogOfNonPositive => "logarithm of a non-positive value",
            DomainErrorKind::SqrtOfNegative => "square root of a negative value",
            DomainErrorKind::InvalidPower => "fractional power of a negative value",
            DomainErrorKind::NonFinite => "non-finite value",
            DomainErrorKind::MissingVariable => "state vector too short",
        })
    }
}

/// Evaluation failure, with the offending subtree and the evaluation point.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind} in `{subtree}` at x = {x:?}, t = {t}")]
pub struct EvalError {
    pub kind: DomainErrorKind,
    pub subtree: String,
    pub x: Vec<f64>,
    pub t: f64,
}

pub(crate) fn apply_unary(op: UnaryOp, v: f64) -> Result<f64, DomainErrorKind> {
    let r = match op {
        UnaryOp::Neg => -v,
        UnaryOp::Sin => v.sin(),
        UnaryOp::Cos => v.cos(),
        UnaryOp::Exp => v.exp(),
        UnaryOp::Ln => {
            if v <= 0.0 {
                return Err(DomainErrorKind::LogOfNonPositive);
            }
            v.ln()
        }
        UnaryOp::Sqrt => {
            if v < 0.0 {
                return Err(DomainErrorKind::SqrtOfNegative);
            }
            v.sqrt()
        }
    };
    finite(r)
}

fn finite(v: f64) -> Result<f64, DomainErrorKind> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DomainErrorKind::NonFinite)
    }
}

fn apply_pow(base: f64, c: f64) -> Result<f64, DomainErrorKind> {
    let integral = c.fract() == 0.0;
    if base == 0.0 && c < 0.0 {
        return Err(DomainErrorKind::DivisionByZero);
    }
    if base < 0.0 && !integral {
        return Err(DomainErrorKind::InvalidPower);
    }
    let r = if integral && c.abs() <= i32::MAX as f64 {
        base.powi(c as i32)
    } else {
        base.powf(c)
    };
    finite(r)
}

impl Expr {
    /// Evaluates the expression at state `x` and time `t`.
    pub fn evaluate(&self, x: &[f64], t: f64) -> Result<f64, EvalError> {
        self.eval_inner(x, t).map_err(|(node, kind)| EvalError {
            kind,
            subtree: node.to_string(),
            x: x.to_vec(),
            t,
        })
    }

    fn eval_inner<'a>(&'a self, x: &[f64], t: f64) -> Result<f64, (&'a Expr, DomainErrorKind)> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::State(k) => x.get(*k).copied().ok_or((self, DomainErrorKind::MissingVariable)),
            Expr::Time => Ok(t),
            Expr::Unary(op, a) => {
                let v = a.eval_inner(x, t)?;
                apply_unary(*op, v).map_err(|k| (self, k))
            }
            Expr::Binary(op, a, b) => {
                let u = a.eval_inner(x, t)?;
                let v = b.eval_inner(x, t)?;
                let r = match op {
                    BinaryOp::Add => u + v,
                    BinaryOp::Sub => u - v,
                    BinaryOp::Mul => u * v,
                    BinaryOp::Div => {
                        if v == 0.0 {
                            return Err((self, DomainErrorKind::DivisionByZero));
                        }
                        u / v
                    }
                };
                finite(r).map_err(|k| (self, k))
            }
            Expr::Pow(a, c) => {
                let v = a.eval_inner(x, t)?;
                apply_pow(v, *c).map_err(|k| (self, k))
            }
        }
    }
}
