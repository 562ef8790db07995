//! Window condition for periodic asymmetries.

use serde::Serialize;

use crate::expr::{EvalError, Expr};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AveragingError {
    #[error("asymmetry must depend on t only, found {0}")]
    NotTimeOnly(String),
    #[error("rate alpha = {0} must be positive")]
    NonPositiveRate(f64),
    #[error("window T = {0} must be positive")]
    NonPositiveWindow(f64),
    #[error("time grid needs at least two points")]
    Grid,
    #[error("b({t}) = {value} is not positive")]
    NonPositive { t: f64, value: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedCheck {
    /// `b(t + T) < exp(2 alpha T) b(t)` at every grid point.
    pub satisfied: bool,
    pub window: f64,
    pub alpha: f64,
    /// Largest `ln(b(t + T) / b(t)) - 2 alpha T`.
    pub worst_margin: f64,
    pub worst_t: f64,
    /// `min b` and `max b` over the grid span, refined near the extrema.
    pub b_min: f64,
    pub b_max: f64,
    /// `ln(b_max / b_min) / (2 alpha)`, a window length that always works.
    pub sufficient_window: f64,
}

/// `n` evenly spaced points covering `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Checks the averaged rate condition for a scalar asymmetry `b(t)` with
/// self rate `alpha` over window `window`.
pub fn averaged_jacobian_check(b: &Expr, alpha: f64, window: f64, grid: &[f64]) -> Result<AveragedCheck, AveragingError> {
    if b.max_state().is_some() {
        return Err(AveragingError::NotTimeOnly(b.to_string()));
    }
    if !(alpha > 0.0) {
        return Err(AveragingError::NonPositiveRate(alpha));
    }
    if !(window > 0.0) {
        return Err(AveragingError::NonPositiveWindow(window));
    }
    if grid.len() < 2 {
        return Err(AveragingError::Grid);
    }
    let eval = |t: f64| -> Result<f64, AveragingError> {
        let v = b.evaluate(&[], t)?;
        if !(v > 0.0) {
            return Err(AveragingError::NonPositive { t, value: v });
        }
        Ok(v)
    };

    let values: Vec<f64> = grid.iter().map(|&t| eval(t)).collect::<Result<_, _>>()?;
    let growth = 2.0 * alpha * window;
    let mut worst = (f64::NEG_INFINITY, grid[0]);
    for (&t, &bt) in grid.iter().zip(&values) {
        let m = (eval(t + window)? / bt).ln() - growth;
        if m > worst.0 {
            worst = (m, t);
        }
    }

    let (mut lo, mut hi) = (0, 0);
    for (k, v) in values.iter().enumerate() {
        if *v < values[lo] {
            lo = k;
        }
        if *v > values[hi] {
            hi = k;
        }
    }
    let b_min = refine(&eval, grid, lo, 1.0)?.min(values[lo]);
    let b_max = refine(&eval, grid, hi, -1.0)?.max(values[hi]);

    Ok(AveragedCheck {
        satisfied: worst.0 < 0.0,
        window,
        alpha,
        worst_margin: worst.0,
        worst_t: worst.1,
        b_min,
        b_max,
        sufficient_window: (b_max / b_min).ln() / (2.0 * alpha),
    })
}

/// Golden-section search for the minimum of `sign * b` between the grid
/// neighbours of `k`; returns the value of `b` there.
fn refine<F>(eval: &F, grid: &[f64], k: usize, sign: f64) -> Result<f64, AveragingError>
where
    F: Fn(f64) -> Result<f64, AveragingError>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (sign * eval(c)?, sign * eval(d)?);
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = sign * eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = sign * eval(d)?;
        }
    }
    eval(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use std::f64::consts::PI;

    fn b() -> Expr {
        parse_expression("1 + 0.9*sin(t)", 0).unwrap()
    }

    #[test]
    fn sufficient_window_for_sine() {
        let c = averaged_jacobian_check(&b(), 0.05, 30.0, &uniform_grid(0.0, 2.0 * PI, 20001)).unwrap();
        assert!(c.satisfied);
        assert!((c.b_min - 0.1).abs() < 1e-12);
        assert!((c.b_max - 1.9).abs() < 1e-12);
        assert!((c.sufficient_window - 10.0 * 19f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn short_window_fails() {
        let c = averaged_jacobian_check(&b(), 0.05, 5.0, &uniform_grid(0.0, 2.0 * PI, 2001)).unwrap();
        assert!(!c.satisfied);
        assert!(c.worst_margin > 0.0);
    }

    #[test]
    fn constant_asymmetry_passes_any_window() {
        let c = averaged_jacobian_check(&Expr::constant(3.0), 0.01, 0.1, &uniform_grid(0.0, 1.0, 11)).unwrap();
        assert!(c.satisfied);
        assert_eq!(c.sufficient_window, 0.0);
    }

    #[test]
    fn input_validation() {
        let g = uniform_grid(0.0, 1.0, 5);
        let x = parse_expression("1 + x1", 1).unwrap();
        assert!(matches!(averaged_jacobian_check(&x, 1.0, 1.0, &g), Err(AveragingError::NotTimeOnly(_))));
        assert_eq!(averaged_jacobian_check(&b(), 0.0, 1.0, &g), Err(AveragingError::NonPositiveRate(0.0)));
        assert_eq!(averaged_jacobian_check(&b(), 1.0, -1.0, &g), Err(AveragingError::NonPositiveWindow(-1.0)));
        let neg = parse_expression("sin(t)", 0).unwrap();
        assert!(matches!(averaged_jacobian_check(&neg, 1.0, 1.0, &g), Err(AveragingError::NonPositive { .. })));
    }
}
