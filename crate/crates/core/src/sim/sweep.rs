//! The periodic-asymmetry experiment and CSV export.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use super::{integrate, norm, SimError, Trajectory};
use crate::expr::DynamicsSpec;
use crate::par;

/// `x1' = -alpha x1 + x2`, `x2' = -(1 + 0.9 sin(omega t)) x1 - alpha x2`.
pub fn example4_dynamics(alpha: f64, omega: f64) -> DynamicsSpec {
    let f1 = format!("-{alpha}*x1 + x2");
    let f2 = format!("-(1 + 0.9*sin({omega}*t))*x1 - {alpha}*x2");
    DynamicsSpec::parse(&[f1, f2]).expect("well-formed template")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    /// Stable when `||x(t_end)|| < stable_ratio ||x0||`.
    pub stable_ratio: f64,
    /// Unstable when `||x(t_end)|| > unstable_ratio ||x0||` or on divergence.
    pub unstable_ratio: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { x0: vec![1.0, 0.5], t_end: 2000.0, dt: 1e-2, stable_ratio: 1e-3, unstable_ratio: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVerdict {
    Stable,
    Unstable,
    Inconclusive,
}

impl fmt::Display for SweepVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVerdict::Stable => "stable",
            SweepVerdict::Unstable => "unstable",
            SweepVerdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub omega: f64,
    pub verdict: SweepVerdict,
    pub final_norm: f64,
}

impl SweepConfig {
    pub fn classify(&self, tr: &Trajectory) -> SweepVerdict {
        let start = norm(&self.x0);
        let end = norm(tr.last());
        if tr.diverged || end > self.unstable_ratio * start {
            SweepVerdict::Unstable
        } else if tr.error.is_none() && end < self.stable_ratio * start {
            SweepVerdict::Stable
        } else {
            SweepVerdict::Inconclusive
        }
    }
}

/// One cell per `(alpha, omega)`, alphas outer. Cells run in parallel when
/// `parallel` is set; results do not depend on it.
pub fn example4_sweep(
    alphas: &[f64],
    omegas: &[f64],
    config: &SweepConfig,
    parallel: bool,
) -> Result<Vec<SweepCell>, SimError> {
    let cells: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| omegas.iter().map(move |&w| (a, w))).collect();
    par::try_map(parallel, &cells, |&(alpha, omega)| {
        let tr = integrate(&example4_dynamics(alpha, omega), &config.x0, 0.0, config.t_end, config.dt)?;
        Ok(SweepCell { alpha, omega, verdict: config.classify(&tr), final_norm: norm(tr.last()) })
    })
}

pub fn write_trajectory_csv<W: Write>(tr: &Trajectory, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=tr.dim()).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for (t, x) in tr.iter() {
        let mut row = vec![t.to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}
