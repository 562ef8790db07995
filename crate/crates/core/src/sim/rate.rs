use serde::Serialize;

use super::{norm, Trajectory};

/// Distances below this are treated as numerically zero.
pub const DISTANCE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RateError {
    #[error("trajectories are on different time grids")]
    GridMismatch,
    #[error("trajectories coincide at t = {0}")]
    ZeroDistance(f64),
    #[error("window [{0}, {1}] holds fewer than two common grid points")]
    Window(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    /// Negated least-squares slope of `ln ||a(t) - b(t)||`.
    pub rate: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub points: usize,
    /// Set when the distance fell below `DISTANCE_FLOOR` and the window was
    /// cut at that time.
    pub truncated_at: Option<f64>,
}

/// Exponential convergence rate between two trajectories over `[lo, hi]`.
pub fn contraction_rate(a: &Trajectory, b: &Trajectory, window: (f64, f64)) -> Result<RateEstimate, RateError> {
    if a.dt != b.dt || a.t0 != b.t0 || a.dim() != b.dim() {
        return Err(RateError::GridMismatch);
    }
    let len = a.len().min(b.len());
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    let mut truncated_at = None;
    let eps = 1e-9 * a.dt;
    for k in 0..len {
        let t = a.time(k);
        if t < window.0 - eps || t > window.1 + eps {
            continue;
        }
        let diff: Vec<f64> = a.state(k).iter().zip(b.state(k)).map(|(p, q)| p - q).collect();
        let d = norm(&diff);
        if d < DISTANCE_FLOOR {
            if ts.is_empty() {
                return Err(RateError::ZeroDistance(t));
            }
            truncated_at = Some(t);
            break;
        }
        ts.push(t);
        logs.push(d.ln());
    }
    if ts.len() < 2 {
        return Err(RateError::Window(window.0, window.1));
    }
    let m = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / m;
    let y_mean = logs.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(&logs) {
        sxy += (t - t_mean) * (y - y_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    let slope = sxy / sxx;
    let sse: f64 = ts
        .iter()
        .zip(&logs)
        .map(|(t, y)| {
            let r = y - (y_mean + slope * (t - t_mean));
            r * r
        })
        .sum();
    Ok(RateEstimate { rate: -slope, residual: (sse / m).sqrt(), points: ts.len(), truncated_at })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::DynamicsSpec;
    use crate::sim::integrate;

    #[test]
    fn exact_exponential_gap() {
        let d = DynamicsSpec::parse(&["-x1"]).unwrap();
        let a = integrate(&d, &[1.0], 0.0, 5.0, 1e-3).unwrap();
        let b = integrate(&d, &[2.0], 0.0, 5.0, 1e-3).unwrap();
        let r = contraction_rate(&a, &b, (0.0, 5.0)).unwrap();
        assert!((r.rate - 1.0).abs() < 1e-6, "{}", r.rate);
        assert!(r.residual < 1e-9);
        assert_eq!(r.points, 5001);
    }

    #[test]
    fn identical_starts_are_rejected() {
        let d = DynamicsSpec::parse(&["-x1"]).unwrap();
        let a = integrate(&d, &[1.0], 0.0, 1.0, 1e-2).unwrap();
        assert_eq!(contraction_rate(&a, &a, (0.0, 1.0)), Err(RateError::ZeroDistance(0.0)));
    }

    #[test]
    fn underflow_truncates_window() {
        let d = DynamicsSpec::parse(&["-10*x1"]).unwrap();
        let a = integrate(&d, &[1.0], 0.0, 5.0, 1e-2).unwrap();
        let b = integrate(&d, &[0.0], 0.0, 5.0, 1e-2).unwrap();
        let r = contraction_rate(&a, &b, (0.0, 5.0)).unwrap();
        let cut = r.truncated_at.unwrap();
        assert!(cut > 3.0 && cut < 3.3, "{cut}");
        assert!((r.rate - 10.0).abs() < 1e-3);
    }

    #[test]
    fn mismatched_grids() {
        let d = DynamicsSpec::parse(&["-x1"]).unwrap();
        let a = integrate(&d, &[1.0], 0.0, 1.0, 1e-2).unwrap();
        let b = integrate(&d, &[2.0], 0.0, 1.0, 2e-2).unwrap();
        assert_eq!(contraction_rate(&a, &b, (0.0, 1.0)), Err(RateError::GridMismatch));
    }
}
