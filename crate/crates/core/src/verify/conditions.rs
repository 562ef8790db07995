//! Rate condition (ii) and the numerical LMI check.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::expr::EvalError;
use crate::graph::{feedback_neighbors, SignedNetwork};
use crate::metric::{lyapunov_operator, max_eigenvalue, DiagonalMetric};
use crate::par;
use crate::region::SamplePoint;
use crate::report::one_based;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeMargin {
    #[serde(serialize_with = "one_based")]
    pub node: usize,
    #[serde(serialize_with = "one_based")]
    pub neighbors: Vec<usize>,
    pub satisfied: bool,
    /// Smallest `alpha_i = -a_ii` over samples.
    pub min_rate: f64,
    /// Smallest `alpha_i - 1/2 sum_j b_dot_ij / b_ij` over samples.
    pub margin: f64,
    /// Sample attaining `margin`.
    pub point: SamplePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionIi {
    pub satisfied: bool,
    /// Every asymmetry is constant, so the condition reduces to `alpha_i > 0`.
    pub constant_asymmetry_shortcut: bool,
    pub nodes: Vec<NodeMargin>,
}

/// `sum_{j in N_i} b_dot_ij / b_ij` at one point, with `b_ij` oriented from
/// node `i` (`a_ji = -b_ij a_ij`).
pub fn neighbor_log_rate(net: &SignedNetwork, i: usize, x: &[f64], t: f64) -> Result<f64, EvalError> {
    let mut sum = 0.0;
    for p in net.pairs().iter().filter(|p| p.i == i || p.j == i) {
        let b = p.asymmetry.evaluate(x, t)?;
        let b_dot = p.rate.evaluate(x, t)?;
        sum += p.orientation(i) * b_dot / b;
    }
    Ok(sum)
}

/// Self rates dominate half the logarithmic derivative of the asymmetries:
/// `alpha_i > 1/2 sum_{j in N_i} b_dot_ij / b_ij` at every sample.
pub fn check_condition_ii(net: &SignedNetwork) -> Result<ConditionIi, EvalError> {
    let cfg = net.config();
    let nodes: Vec<usize> = (0..net.dim()).collect();
    let nodes = par::try_map(cfg.parallel, &nodes, |&i| {
        let aii = &net.diagonal(i).expr;
        let mut min_rate = f64::INFINITY;
        let mut worst = (f64::INFINITY, 0);
        for (k, p) in net.points().iter().enumerate() {
            let alpha = -aii.evaluate(&p.x, p.t)?;
            let margin = alpha - 0.5 * neighbor_log_rate(net, i, &p.x, p.t)?;
            min_rate = min_rate.min(alpha);
            if margin < worst.0 {
                worst = (margin, k);
            }
        }
        Ok(NodeMargin {
            node: i,
            neighbors: feedback_neighbors(net, i).into_iter().collect(),
            satisfied: min_rate >= cfg.positivity_margin && worst.0 >= cfg.positivity_margin,
            min_rate,
            margin: worst.0,
            point: net.points()[worst.1].clone(),
        })
    })?;
    Ok(ConditionIi {
        satisfied: nodes.iter().all(|m| m.satisfied),
        constant_asymmetry_shortcut: net.pairs().iter().all(|p| p.constant),
        nodes,
    })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LmiError {
    #[error("metric weight d{} = {value} is not positive at x = {:?}, t = {}", .node + 1, .point.x, .point.t)]
    NotPositive { node: usize, value: f64, point: SamplePoint },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LmiCheck {
    pub satisfied: bool,
    pub max_eigenvalue: f64,
    pub point: SamplePoint,
    /// Largest off-diagonal `|L_pq|` over samples.
    pub max_off_diagonal: f64,
    /// Largest off-diagonal `|L_pq| / max(||A||_F, 1)` over samples.
    pub max_off_diagonal_relative: f64,
    pub diagonal: bool,
    pub margin: f64,
    /// Per-sample maximum eigenvalue, in sample order.
    #[serde(skip)]
    pub sample_eigenvalues: Vec<f64>,
}

/// Tolerance on the off-diagonal part of `L(A, D)` for chain metrics,
/// relative to `max(||A||_F, 1)`.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-9;

/// Numeric Jacobian restricted to `nodes` (rows and columns in that order).
pub fn jacobian_block(net: &SignedNetwork, nodes: &[usize], x: &[f64], t: f64) -> Result<DMatrix<f64>, EvalError> {
    let jac = net.jacobian();
    let mut a = DMatrix::zeros(nodes.len(), nodes.len());
    for (r, &i) in nodes.iter().enumerate() {
        for (c, &j) in nodes.iter().enumerate() {
            if i == j || net.has_edge(i, j) {
                a[(r, c)] = jac[i][j].evaluate(x, t)?;
            }
        }
    }
    Ok(a)
}

/// `L(A, D) = D_dot + A^T D + D A <= -margin` at every sample, with `A`
/// the Jacobian block of the metric's nodes.
pub fn check_lmi(net: &SignedNetwork, metric: &DiagonalMetric, margin: f64) -> Result<LmiCheck, LmiError> {
    let per_sample = par::try_map(net.config().parallel, net.points(), |p| {
        let v = metric.evaluate(&p.x, p.t)?;
        if let Some(k) = v.d.iter().position(|&d| !(d > 0.0)) {
            return Err(LmiError::NotPositive { node: metric.order[k], value: v.d[k], point: p.clone() });
        }
        let a = jacobian_block(net, &metric.order, &p.x, p.t)?;
        let d = DMatrix::from_diagonal(&DVector::from_vec(v.d));
        let d_dot = DMatrix::from_diagonal(&DVector::from_vec(v.d_dot));
        let l = lyapunov_operator(&a, &d, &d_dot);
        let mut off = 0.0f64;
        for r in 0..l.nrows() {
            for c in 0..l.ncols() {
                if r != c {
                    off = off.max(l[(r, c)].abs());
                }
            }
        }
        Ok((max_eigenvalue(&l), off, off / a.norm().max(1.0)))
    })?;

    let mut worst = (f64::NEG_INFINITY, 0);
    let (mut off, mut off_rel) = (0.0f64, 0.0f64);
    for (k, &(e, o, r)) in per_sample.iter().enumerate() {
        if e > worst.0 {
            worst = (e, k);
        }
        off = off.max(o);
        off_rel = off_rel.max(r);
    }
    let diagonal = off_rel <= OFF_DIAGONAL_TOLERANCE;
    Ok(LmiCheck {
        satisfied: worst.0 <= -margin && diagonal,
        max_eigenvalue: worst.0,
        point: net.points()[worst.1].clone(),
        max_off_diagonal: off,
        max_off_diagonal_relative: off_rel,
        diagonal,
        margin,
        sample_eigenvalues: per_sample.into_iter().map(|s| s.0).collect(),
    })
}
