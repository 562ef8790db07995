//! Block metrics for systems partitioned into vector-valued modules.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{lyapunov_operator, max_eigenvalue, min_eigenvalue, MetricError};
use crate::region::SamplePoint;
use crate::report::one_based;

/// Floor on the smallest eigenvalue of every module metric.
pub const MIN_METRIC_EIGENVALUE: f64 = 1e-9;

/// Constant symmetric positive-definite metric per module.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMetric {
    modules: Vec<Vec<usize>>,
    matrices: Vec<DMatrix<f64>>,
}

impl BlockMetric {
    pub fn new(modules: Vec<Vec<usize>>, matrices: Vec<DMatrix<f64>>) -> Result<Self, MetricError> {
        if modules.len() != matrices.len() {
            return Err(MetricError::ModuleCount { expected: modules.len(), got: matrices.len() });
        }
        for (k, (block, m)) in modules.iter().zip(&matrices).enumerate() {
            let module = k + 1;
            if m.nrows() != block.len() || m.ncols() != block.len() {
                return Err(MetricError::Dimension { module, expected: block.len(), rows: m.nrows(), cols: m.ncols() });
            }
            let scale = 1.0 + m.amax();
            if (m - m.transpose()).amax() > 1e-12 * scale {
                return Err(MetricError::NotSymmetric { module });
            }
            let min_eigenvalue = min_eigenvalue(m);
            if min_eigenvalue < MIN_METRIC_EIGENVALUE {
                return Err(MetricError::NotPositive { module, min_eigenvalue, floor: MIN_METRIC_EIGENVALUE });
            }
        }
        Ok(Self { modules, matrices })
    }

    /// Identity metric on every module.
    pub fn identity(modules: Vec<Vec<usize>>) -> Self {
        let matrices = modules.iter().map(|b| DMatrix::identity(b.len(), b.len())).collect();
        Self { modules, matrices }
    }

    pub fn modules(&self) -> &[Vec<usize>] {
        &self.modules
    }

    pub fn matrix(&self, module: usize) -> &DMatrix<f64> {
        &self.matrices[module]
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    /// The block `A_IJ` (rows of module `I`, columns of module `J`).
    pub fn block(&self, a: &DMatrix<f64>, i: usize, j: usize) -> DMatrix<f64> {
        let (rows, cols) = (&self.modules[i], &self.modules[j]);
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| a[(rows[r], cols[c])])
    }
}

/// Full numeric Jacobian at one sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianSample {
    pub point: SamplePoint,
    pub a: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityWitness {
    #[serde(serialize_with = "one_based")]
    pub modules: (usize, usize),
    pub residual: f64,
    pub bound: f64,
    pub point: SamplePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCompatibility {
    pub satisfied: bool,
    /// Largest `||M_I A_IJ - A_IJ M_J||_F / (1 + ||A_IJ||_F)` seen.
    pub max_relative_residual: f64,
    pub witness: Option<CompatibilityWitness>,
}

/// Checks `M_I A_IJ = A_IJ M_J` for the ordered module pairs `(I, J)` at
/// every sample, to `1e-6 (1 + ||A_IJ||_F)`.
pub fn check_block_compatibility(
    metric: &BlockMetric,
    samples: &[JacobianSample],
    pairs: &[(usize, usize)],
) -> BlockCompatibility {
    let mut worst: Option<(f64, CompatibilityWitness)> = None;
    for s in samples {
        for &(i, j) in pairs {
            let aij = metric.block(&s.a, i, j);
            let residual = (metric.matrix(i) * &aij - &aij * metric.matrix(j)).norm();
            let bound = 1e-6 * (1.0 + aij.norm());
            let rel = residual / (1.0 + aij.norm());
            if worst.as_ref().is_none_or(|(w, _)| rel > *w) {
                let witness = CompatibilityWitness { modules: (i, j), residual, bound, point: s.point.clone() };
                worst = Some((rel, witness));
            }
        }
    }
    match worst {
        None => BlockCompatibility { satisfied: true, max_relative_residual: 0.0, witness: None },
        Some((rel, w)) => {
            let satisfied = w.residual <= w.bound && rel <= 1e-6;
            BlockCompatibility { satisfied, max_relative_residual: rel, witness: (!satisfied).then_some(w) }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockConditionIi {
    pub satisfied: bool,
    pub max_eigenvalue: f64,
    /// Index of the sample attaining `max_eigenvalue`.
    pub worst_sample: usize,
}

/// `L(A_ii, M_i) + (sum_j b_dot_ij / b_ij) M_i < 0` at every sample, as a
/// maximum eigenvalue at most `-margin`. `log_rates[k]` is the neighbour sum
/// at sample `k`.
pub fn check_block_condition_ii(m: &DMatrix<f64>, a_ii: &[DMatrix<f64>], log_rates: &[f64], margin: f64) -> BlockConditionIi {
    let zero = DMatrix::zeros(m.nrows(), m.ncols());
    let mut worst = (f64::NEG_INFINITY, 0);
    for (k, (a, r)) in a_ii.iter().zip(log_rates).enumerate() {
        let l = lyapunov_operator(a, m, &zero) + m * *r;
        let e = max_eigenvalue(&l);
        if e > worst.0 {
            worst = (e, k);
        }
    }
    BlockConditionIi { satisfied: worst.0 <= -margin, max_eigenvalue: worst.0, worst_sample: worst.1 }
}
