//! Fixed-step RK4 integration, with and without interconnection delays.

mod rate;
mod sweep;

pub use rate::{contraction_rate, RateError, RateEstimate, DISTANCE_FLOOR};
pub use sweep::{
    example4_dynamics, example4_sweep, write_sweep_csv, write_trajectory_csv, SweepCell, SweepConfig, SweepVerdict,
};

use serde::{Deserialize, Serialize};

use crate::expr::{DynamicsSpec, EvalError, Var};

/// States with a norm above this end the integration with `diverged` set.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("step dt = {0} must be positive and finite")]
    Step(f64),
    #[error("end time {t_end} must exceed start time {t0}")]
    Span { t0: f64, t_end: f64 },
    #[error("initial state has {got} entries, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("delay on x{} -> x{} is {delay}; delays must be finite and nonnegative", .from + 1, .to + 1)]
    Delay { from: usize, to: usize, delay: f64 },
    #[error("delay names x{} -> x{} outside a {n}-dimensional system", .from + 1, .to + 1)]
    DelayEdge { from: usize, to: usize, n: usize },
    #[error("delay on x{} -> x{} is given twice", .from + 1, .to + 1)]
    DuplicateDelay { from: usize, to: usize },
}

/// States on the grid `t0 + k dt`, `k = 0..len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    dim: usize,
    states: Vec<f64>,
    /// A state exceeded `DIVERGENCE_NORM` or became non-finite.
    pub diverged: bool,
    /// Evaluation failure that cut the integration short.
    pub error: Option<EvalError>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of steps taken (`len() - 1`).
    pub fn steps(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.len() - 1)
    }

    /// Completed the requested span without divergence or error.
    pub fn completed(&self, steps: usize) -> bool {
        !self.diverged && self.error.is_none() && self.steps() == steps
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        (0..self.len()).map(move |k| (self.time(k), self.state(k)))
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Number of `dt` steps covering `[t0, t_end]`.
pub fn step_count(t0: f64, t_end: f64, dt: f64) -> Result<usize, SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::Step(dt));
    }
    if !(t_end > t0) {
        return Err(SimError::Span { t0, t_end });
    }
    Ok(((t_end - t0) / dt).round().max(1.0) as usize)
}

/// Classical RK4 on the grid. `field(pos, t, x, past, out)` receives the
/// stage position in units of `dt` from `t0` and the states stored so far.
fn rk4<F>(x0: &[f64], t0: f64, dt: f64, steps: usize, mut field: F) -> Trajectory
where
    F: FnMut(f64, f64, &[f64], &[f64], &mut [f64]) -> Result<(), EvalError>,
{
    let n = x0.len();
    let mut states = Vec::with_capacity((steps + 1) * n);
    states.extend_from_slice(x0);
    let mut traj = Trajectory { t0, dt, dim: n, states: Vec::new(), diverged: false, error: None };
    if !x0.iter().all(|v| v.is_finite()) || norm(x0) > DIVERGENCE_NORM {
        traj.diverged = true;
        traj.states = states;
        return traj;
    }
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut x = x0.to_vec();
    for step in 0..steps {
        let pos = step as f64;
        let t = t0 + pos * dt;
        let result = (|| {
            field(pos, t, &x, &states, &mut k1)?;
            for i in 0..n {
                stage[i] = x[i] + 0.5 * dt * k1[i];
            }
            field(pos + 0.5, t + 0.5 * dt, &stage, &states, &mut k2)?;
            for i in 0..n {
                stage[i] = x[i] + 0.5 * dt * k2[i];
            }
            field(pos + 0.5, t + 0.5 * dt, &stage, &states, &mut k3)?;
            for i in 0..n {
                stage[i] = x[i] + dt * k3[i];
            }
            field(pos + 1.0, t + dt, &stage, &states, &mut k4)
        })();
        if let Err(e) = result {
            traj.error = Some(e);
            break;
        }
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !x.iter().all(|v| v.is_finite()) {
            traj.diverged = true;
            break;
        }
        states.extend_from_slice(&x);
        if norm(&x) > DIVERGENCE_NORM {
            traj.diverged = true;
            break;
        }
    }
    traj.states = states;
    traj
}

pub fn integrate(dynamics: &DynamicsSpec, x0: &[f64], t0: f64, t_end: f64, dt: f64) -> Result<Trajectory, SimError> {
    let steps = step_count(t0, t_end, dt)?;
    check_dim(dynamics, x0)?;
    Ok(rk4(x0, t0, dt, steps, |_, t, x, _, out| dynamics.eval_into(x, t, out)))
}

fn check_dim(dynamics: &DynamicsSpec, x0: &[f64]) -> Result<(), SimError> {
    if x0.len() != dynamics.dim() {
        return Err(SimError::Dimension { expected: dynamics.dim(), got: x0.len() });
    }
    Ok(())
}

/// Every occurrence of `x_from` in `f_to` is read at `t - delay`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeDelay {
    pub from: usize,
    pub to: usize,
    pub delay: f64,
}

/// Per-edge delays with a constant history (which is also the initial state).
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySpec {
    pub delays: Vec<EdgeDelay>,
    pub history: Vec<f64>,
}

impl DelaySpec {
    pub fn new(delays: Vec<EdgeDelay>, history: Vec<f64>) -> Result<Self, SimError> {
        for (k, d) in delays.iter().enumerate() {
            if !(d.delay >= 0.0 && d.delay.is_finite()) {
                return Err(SimError::Delay { from: d.from, to: d.to, delay: d.delay });
            }
            if delays[..k].iter().any(|e| e.from == d.from && e.to == d.to) {
                return Err(SimError::DuplicateDelay { from: d.from, to: d.to });
            }
        }
        Ok(Self { delays, history })
    }

    pub fn max_delay(&self) -> f64 {
        self.delays.iter().map(|d| d.delay).fold(0.0, f64::max)
    }
}

pub fn integrate_delayed(
    dynamics: &DynamicsSpec,
    spec: &DelaySpec,
    t0: f64,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, SimError> {
    let steps = step_count(t0, t_end, dt)?;
    check_dim(dynamics, &spec.history)?;
    let n = dynamics.dim();
    // per target row: (source, delay in steps)
    let mut rows: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for d in &spec.delays {
        if d.from >= n || d.to >= n {
            return Err(SimError::DelayEdge { from: d.from, to: d.to, n });
        }
        let m = (d.delay / dt).round();
        if (m * dt - d.delay).abs() > 1e-12 * d.delay.max(1.0) {
            log::warn!(
                "delay {} on x{} -> x{} rounded to {} (a multiple of dt = {dt})",
                d.delay,
                d.from + 1,
                d.to + 1,
                m * dt
            );
        }
        if !dynamics.rhs()[d.to].depends_on(Var::State(d.from)) {
            log::warn!("f{} does not depend on x{}; its delay has no effect", d.to + 1, d.from + 1);
        }
        rows[d.to].push((d.from, m as usize));
    }

    let history = &spec.history;
    let mut buf = vec![0.0; n];
    let trajectory = rk4(history, t0, dt, steps, |pos, t, x, past, out| {
        for (i, f) in dynamics.rhs().iter().enumerate() {
            if rows[i].is_empty() {
                out[i] = f.evaluate(x, t)?;
                continue;
            }
            buf.copy_from_slice(x);
            for &(j, m) in &rows[i] {
                if m > 0 {
                    buf[j] = past_value(past, n, history, j, pos - m as f64);
                }
            }
            out[i] = f.evaluate(&buf, t)?;
        }
        Ok(())
    });
    Ok(trajectory)
}

/// Linear interpolation of component `j` at grid position `pos`; constant
/// history before the start.
fn past_value(past: &[f64], n: usize, history: &[f64], j: usize, pos: f64) -> f64 {
    if pos <= 0.0 {
        return history[j];
    }
    let k = pos.floor() as usize;
    let frac = pos - k as f64;
    let lo = past[k * n + j];
    if frac == 0.0 {
        lo
    } else {
        lo + frac * (past[(k + 1) * n + j] - lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(f: &[&str]) -> DynamicsSpec {
        DynamicsSpec::parse(f).unwrap()
    }

    #[test]
    fn scalar_decay_matches_exponential() {
        let tr = integrate(&spec(&["-x1"]), &[1.0], 0.0, 1.0, 1e-3).unwrap();
        assert_eq!(tr.steps(), 1000);
        assert!((tr.last()[0] - (-1f64).exp()).abs() < 1e-9);
        assert!(tr.completed(1000));
    }

    #[test]
    fn growth_is_flagged_as_divergent() {
        let tr = integrate(&spec(&["x1"]), &[1.0], 0.0, 100.0, 1e-3).unwrap();
        assert!(tr.diverged);
        assert!(tr.end_time() < 30.0);
    }

    #[test]
    fn example_one_converges() {
        let d = spec(&["-x1 - x1*x2", "x1^2 - x2 - x2*x3", "x2^2 - x3"]);
        let tr = integrate(&d, &[0.5, 0.5, 0.5], 0.0, 50.0, 1e-2).unwrap();
        assert!(norm(tr.last()) < 1e-6);
    }

    #[test]
    fn domain_error_truncates() {
        let tr = integrate(&spec(&["-sqrt(x1)"]), &[1.0], 0.0, 10.0, 1e-2).unwrap();
        assert!(tr.error.is_some());
        assert!(tr.end_time() < 10.0);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |dt: f64| {
            let tr = integrate(&spec(&["-x1"]), &[1.0], 0.0, 1.0, dt).unwrap();
            (tr.last()[0] - (-1f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio >= 12.0, "{ratio}");
    }

    #[test]
    fn time_reversal_returns_to_start() {
        let fwd = integrate(&spec(&["-x1"]), &[1.0], 0.0, 1.0, 1e-3).unwrap();
        let back = integrate(&spec(&["x1"]), fwd.last(), 0.0, 1.0, 1e-3).unwrap();
        assert!((back.last()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn input_validation() {
        let d = spec(&["-x1"]);
        assert_eq!(integrate(&d, &[1.0], 0.0, 1.0, 0.0), Err(SimError::Step(0.0)));
        assert_eq!(integrate(&d, &[1.0], 1.0, 1.0, 0.1), Err(SimError::Span { t0: 1.0, t_end: 1.0 }));
        assert!(matches!(integrate(&d, &[1.0, 2.0], 0.0, 1.0, 0.1), Err(SimError::Dimension { .. })));
        let bad = DelaySpec::new(vec![EdgeDelay { from: 0, to: 0, delay: -1.0 }], vec![1.0]);
        assert!(matches!(bad, Err(SimError::Delay { .. })));
    }

    fn lti(alpha: f64) -> DynamicsSpec {
        let f1 = format!("-{alpha}*x1 + x2");
        let f2 = format!("-x1 - {alpha}*x2");
        DynamicsSpec::parse(&[f1, f2]).unwrap()
    }

    fn both_delayed(t: f64) -> DelaySpec {
        DelaySpec::new(
            vec![EdgeDelay { from: 1, to: 0, delay: t }, EdgeDelay { from: 0, to: 1, delay: t }],
            vec![1.0, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn zero_delays_are_bitwise_undelayed() {
        let d = lti(1.2);
        let plain = integrate(&d, &[1.0, 0.5], 0.0, 20.0, 1e-2).unwrap();
        let delayed = integrate_delayed(&d, &both_delayed(0.0), 0.0, 20.0, 1e-2).unwrap();
        assert_eq!(plain, delayed);
    }

    #[test]
    fn dominant_rates_survive_delay() {
        let tr = integrate_delayed(&lti(1.2), &both_delayed(5.0), 0.0, 200.0, 1e-2).unwrap();
        assert!(tr.completed(20_000));
        assert!(norm(tr.last()) < 1e-3, "{}", norm(tr.last()));
    }

    #[test]
    fn slow_rates_oscillate_under_delay() {
        let tr = integrate_delayed(&lti(0.05), &both_delayed(5.0), 0.0, 200.0, 1e-2).unwrap();
        assert!(tr.diverged || norm(tr.last()) > 1.0, "{}", norm(tr.last()));
    }

    #[test]
    fn delay_reads_history_then_past() {
        // x1' = x2(t - 1), x2' = 0: x1 grows at x2's constant value
        let d = spec(&["x2", "0*x2"]);
        let s = DelaySpec::new(vec![EdgeDelay { from: 1, to: 0, delay: 1.0 }], vec![0.0, 2.0]).unwrap();
        let tr = integrate_delayed(&d, &s, 0.0, 3.0, 0.25).unwrap();
        assert!((tr.last()[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_between_grid_points() {
        let past = [0.0, 10.0, 2.0, 20.0];
        assert_eq!(past_value(&past, 2, &[5.0, 7.0], 0, -0.5), 5.0);
        assert_eq!(past_value(&past, 2, &[5.0, 7.0], 0, 0.5), 1.0);
        assert_eq!(past_value(&past, 2, &[5.0, 7.0], 1, 1.0), 20.0);
    }
}
