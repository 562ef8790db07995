//! Contraction metrics: the diagonal metric of a feedback chain, kept as
//! products of pair asymmetries, and user-supplied block metrics for
//! modular systems.

mod block;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::expr::{div, EvalError, Expr};
use crate::graph::{CascadeEdge, CascadeVertex, Chain, ChainDecomposition, SignedNetwork};
use crate::report::one_based;

pub use block::{
    check_block_compatibility, check_block_condition_ii, BlockCompatibility, BlockConditionIi, BlockMetric,
    CompatibilityWitness, JacobianSample,
};

/// One asymmetry in a weight product, `b_qp` with `a_pq = -b_qp * a_qp`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    /// `b_qp` written 1-based, e.g. `b32`.
    pub label: String,
    /// Index of the stored network pair.
    pub pair: usize,
    /// +1 when `b_qp` is the stored `b_ij`, -1 when it is its reciprocal.
    pub exponent: f64,
    /// The stored `b_ij` of the pair and its trajectory derivative.
    pub stored: Expr,
    pub stored_rate: Expr,
    /// `b_qp` itself.
    pub oriented: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    pub node: usize,
    pub factors: Vec<Factor>,
}

impl Weight {
    /// The weight as one expression (the empty product is 1).
    pub fn expr(&self) -> Expr {
        self.factors
            .iter()
            .map(|f| f.oriented.clone())
            .reduce(crate::expr::mul)
            .unwrap_or(Expr::Const(1.0))
    }

    pub fn label(&self) -> String {
        if self.factors.is_empty() {
            "1".into()
        } else {
            self.factors.iter().map(|f| f.label.as_str()).collect::<Vec<_>>().join("*")
        }
    }
}

/// Diagonal metric `D = diag{d_k}` over the nodes of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMetric {
    /// Construction order; `weights[k]` belongs to `order[k]`.
    pub order: Vec<usize>,
    pub weights: Vec<Weight>,
}

/// `d` and `d/dt d` at one point, in the metric's node order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    pub d: Vec<f64>,
    pub d_dot: Vec<f64>,
}

impl DiagonalMetric {
    /// The trivial metric `d = 1` on a single node.
    pub fn unit(node: usize) -> Self {
        Self { order: vec![node], weights: vec![Weight { node, factors: Vec::new() }] }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn weight_of(&self, node: usize) -> Option<&Weight> {
        self.weights.iter().find(|w| w.node == node)
    }

    /// Weights and their derivatives by the product rule:
    /// `d_dot_k = d_k * sum_f e_f * b_dot_f / b_f`.
    pub fn evaluate(&self, x: &[f64], t: f64) -> Result<MetricValue, EvalError> {
        let mut d = Vec::with_capacity(self.len());
        let mut d_dot = Vec::with_capacity(self.len());
        for w in &self.weights {
            let (mut prod, mut log_rate) = (1.0, 0.0);
            for f in &w.factors {
                let b = f.stored.evaluate(x, t)?;
                let b_dot = f.stored_rate.evaluate(x, t)?;
                prod *= b.powf(f.exponent);
                log_rate += f.exponent * b_dot / b;
            }
            d.push(prod);
            d_dot.push(prod * log_rate);
        }
        Ok(MetricValue { d, d_dot })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("chain pair (x{}, x{}) is not a reciprocal pair of the network", .0 + 1, .1 + 1)]
    MissingPair(usize, usize),
    #[error("metric for module {module} must be {expected}x{expected}, got {rows}x{cols}")]
    Dimension { module: usize, expected: usize, rows: usize, cols: usize },
    #[error("metric for module {module} is not symmetric")]
    NotSymmetric { module: usize },
    #[error("metric for module {module} has minimum eigenvalue {min_eigenvalue}, below {floor}")]
    NotPositive { module: usize, min_eigenvalue: f64, floor: f64 },
    #[error("expected {expected} module metrics, got {got}")]
    ModuleCount { expected: usize, got: usize },
}

/// Grows the chain metric pair by pair: the root pair `(r, s)` gets
/// `d_r = b_rs`, `d_s = 1`, and a node `q` attached at `p` gets
/// `d_q = d_p * b_qp`.
pub fn build_chain_metric(chain: &Chain, net: &SignedNetwork) -> Result<DiagonalMetric, MetricError> {
    let factor = |q: usize, p: usize| -> Result<Factor, MetricError> {
        let idx = net.pair_index(q, p).ok_or(MetricError::MissingPair(q, p))?;
        let pair = &net.pairs()[idx];
        let exponent = pair.orientation(q);
        let oriented = if exponent > 0.0 {
            pair.asymmetry.clone()
        } else {
            div(Expr::Const(1.0), pair.asymmetry.clone()).simplify()
        };
        Ok(Factor {
            label: format!("b{}{}", q + 1, p + 1),
            pair: idx,
            exponent,
            stored: pair.asymmetry.clone(),
            stored_rate: pair.rate.clone(),
            oriented,
        })
    };

    let (r, s) = chain.root;
    let mut weights = vec![
        Weight { node: r, factors: vec![factor(r, s)?] },
        Weight { node: s, factors: Vec::new() },
    ];
    for step in &chain.steps {
        let parent = weights
            .iter()
            .find(|w| w.node == step.parent)
            .expect("chain steps attach to earlier nodes");
        let mut factors = parent.factors.clone();
        factors.push(factor(step.node, step.parent)?);
        weights.push(Weight { node: step.node, factors });
    }
    Ok(DiagonalMetric { order: chain.nodes.clone(), weights })
}

/// Verdict of one cascade vertex (a chain or a singleton node).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexVerdict {
    pub vertex: CascadeVertex,
    pub contracting: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeReport {
    pub contracting: bool,
    pub vertices: Vec<VertexVerdict>,
    pub edges: Vec<CascadeEdge>,
    pub failing: Vec<String>,
    pub note: &'static str,
}

pub const CASCADE_NOTE: &str = "each chain and singleton is certified with its own metric; a cascade of \
     contracting subsystems is contracting, so no global metric is assembled";

/// Combines per-vertex verdicts (indexed like `dec.vertices`).
pub fn assemble_cascade_report(dec: &ChainDecomposition, contracting: &[bool]) -> CascadeReport {
    let vertices: Vec<VertexVerdict> = dec
        .vertices
        .iter()
        .zip(contracting)
        .map(|(&vertex, &contracting)| VertexVerdict { vertex, contracting })
        .collect();
    let failing = vertices
        .iter()
        .filter(|v| !v.contracting)
        .map(|v| vertex_name(dec, v.vertex))
        .collect::<Vec<_>>();
    CascadeReport {
        contracting: failing.is_empty() && vertices.len() == dec.vertices.len(),
        vertices,
        edges: dec.edges.clone(),
        failing,
        note: CASCADE_NOTE,
    }
}

pub fn vertex_name(dec: &ChainDecomposition, v: CascadeVertex) -> String {
    match v {
        CascadeVertex::Chain(c) => {
            let nodes: Vec<String> = dec.chains[c].nodes.iter().map(|k| format!("x{}", k + 1)).collect();
            format!("chain {} {{{}}}", c + 1, nodes.join(", "))
        }
        CascadeVertex::Node(k) => format!("node x{}", k + 1),
    }
}

/// `L(A, M) = M_dot + A^T M + M A`.
pub fn lyapunov_operator(a: &DMatrix<f64>, m: &DMatrix<f64>, m_dot: &DMatrix<f64>) -> DMatrix<f64> {
    m_dot + a.transpose() * m + m * a
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.max()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Report form of a diagonal metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub weights: Vec<WeightSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSummary {
    #[serde(serialize_with = "one_based")]
    pub node: usize,
    pub product: String,
    pub expression: String,
}

impl From<&DiagonalMetric> for MetricSummary {
    fn from(m: &DiagonalMetric) -> Self {
        Self {
            weights: m
                .weights
                .iter()
                .map(|w| WeightSummary { node: w.node, product: w.label(), expression: w.expr().simplify().to_string() })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::DynamicsSpec;
    use crate::graph::{build_network, decompose_chains, NetworkConfig};
    use crate::region::Region;

    fn chain_net(f: &[&str]) -> (SignedNetwork, ChainDecomposition) {
        let d = DynamicsSpec::parse(f).unwrap();
        let r = Region::cube(f.len(), -1.0, 1.0, (0.0, 1.0)).unwrap();
        let net = build_network(&d, &r, &NetworkConfig { samples: 16, ..NetworkConfig::default() }).unwrap();
        let dec = decompose_chains(&net).unwrap();
        (net, dec)
    }

    #[test]
    fn example_one_weights() {
        let d = DynamicsSpec::parse(&["-x1 - x1*x2", "x1^2 - x2 - x2*x3", "x2^2 - x3"]).unwrap();
        let r = Region::cube(3, -0.9, 3.0, (0.0, 10.0)).unwrap();
        let net = build_network(&d, &r, &NetworkConfig::default()).unwrap();
        let dec = decompose_chains(&net).unwrap();
        let m = build_chain_metric(&dec.chains[0], &net).unwrap();
        let labels: Vec<String> = m.weights.iter().map(Weight::label).collect();
        assert_eq!(labels, vec!["b12", "1", "b32"]);
        let v = m.evaluate(&[0.1, 0.2, 0.3], 1.0).unwrap();
        assert_eq!(v.d, vec![2.0, 1.0, 0.5]);
        assert_eq!(v.d_dot, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn star_chain_weights() {
        // pairs (1,2), (2,3), (2,4) with b12 = 2, b23 = 4, b24 = 5
        let (net, dec) = chain_net(&["-x1 + x2", "-2*x1 - x2 + x3 + x4", "-4*x2 - x3", "-5*x2 - x4"]);
        let m = build_chain_metric(&dec.chains[0], &net).unwrap();
        let labels: Vec<String> = m.weights.iter().map(Weight::label).collect();
        assert_eq!(labels, vec!["b12", "1", "b32", "b42"]);
        let v = m.evaluate(&[0.0; 4], 0.0).unwrap();
        assert_eq!(v.d, vec![2.0, 1.0, 0.25, 0.2]);
    }

    #[test]
    fn two_node_lmi_by_hand() {
        // alpha = 1, a12 = 2, b12 = 3: L(A, D) = diag{-6, -2}
        let (net, dec) = chain_net(&["-x1 + 2*x2", "-6*x1 - x2"]);
        let m = build_chain_metric(&dec.chains[0], &net).unwrap();
        let v = m.evaluate(&[0.0, 0.0], 0.0).unwrap();
        assert_eq!(v.d, vec![3.0, 1.0]);
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -6.0, -1.0]);
        let d = DMatrix::from_diagonal(&v.d.clone().into());
        let l = lyapunov_operator(&a, &d, &DMatrix::zeros(2, 2));
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[-6.0, 0.0, 0.0, -2.0]));
        assert_eq!(max_eigenvalue(&l), -2.0);
    }

    #[test]
    fn product_rule_rate() {
        // b12 = 1 + 0.5 sin(t): d1 = b12, d1_dot = 0.5 cos(t)
        let (net, dec) = chain_net(&["-x1 + x2", "-(1 + 0.5*sin(t))*x1 - x2"]);
        let m = build_chain_metric(&dec.chains[0], &net).unwrap();
        let v = m.evaluate(&[0.0, 0.0], 0.7).unwrap();
        assert!((v.d[0] - (1.0 + 0.5 * 0.7f64.sin())).abs() < 1e-15);
        assert!((v.d_dot[0] - 0.5 * 0.7f64.cos()).abs() < 1e-15);
        assert_eq!(v.d_dot[1], 0.0);
    }

    #[test]
    fn cascade_report_is_a_conjunction() {
        let (_, dec) = chain_net(&["-x1 + x2", "-x1 - x2", "x2 - x3 + x4", "-x3 - x4"]);
        assert_eq!(dec.chains.len(), 2);
        let ok = assemble_cascade_report(&dec, &[true, true]);
        assert!(ok.contracting && ok.failing.is_empty());
        let bad = assemble_cascade_report(&dec, &[true, false]);
        assert!(!bad.contracting);
        assert_eq!(bad.failing, vec!["chain 2 {x3, x4}"]);
    }
}
