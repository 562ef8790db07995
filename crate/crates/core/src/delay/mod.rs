//! Delay-independent certificates for negative feedback interconnections.

use serde::Serialize;

use crate::expr::EvalError;
use crate::graph::{decompose_chains, DecomposeError, SignedNetwork};
use crate::metric::{build_chain_metric, DiagonalMetric, MetricError};
use crate::par;
use crate::region::SamplePoint;
use crate::report::one_based;
use crate::sim::EdgeDelay;

/// Safety factor applied to sampled bounds before any threshold test.
pub const DEFAULT_INFLATION: f64 = 1.1;

/// Region vertices are added to the samples up to this many dimensions
/// (state plus time).
pub const MAX_VERTEX_DIMS: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DelayError {
    #[error("no chain decomposition: {0}")]
    Decompose(#[from] DecomposeError),
    #[error("asymmetry condition fails for pair (x{}, x{})", .0 + 1, .1 + 1)]
    Asymmetry(usize, usize),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("delay names x{} -> x{} outside a {n}-dimensional system", .from + 1, .to + 1)]
    Edge { from: usize, to: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairBound {
    #[serde(serialize_with = "one_based")]
    pub pair: (usize, usize),
    /// Largest sampled `|a_ij| b_ij`.
    pub gamma: f64,
    pub point: Option<SamplePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionBound {
    /// Largest `|a_ij| b_ij` over pairs and samples; a lower bound on the
    /// true supremum.
    pub gamma: f64,
    pub pairs: Vec<PairBound>,
    pub points: usize,
}

/// Samples of the network plus the region's vertices when there are few
/// enough of them.
pub fn bound_points(net: &SignedNetwork) -> Vec<SamplePoint> {
    let mut pts = net.points().to_vec();
    if let Some(v) = net.region().vertices(MAX_VERTEX_DIMS) {
        pts.extend(v);
    }
    pts
}

pub fn interaction_bound(net: &SignedNetwork) -> Result<InteractionBound, EvalError> {
    let pts = bound_points(net);
    let jac = net.jacobian();
    let pairs = par::try_map(net.config().parallel, net.pairs(), |p| {
        let mut best: (f64, Option<usize>) = (0.0, None);
        for (k, s) in pts.iter().enumerate() {
            let v = jac[p.i][p.j].evaluate(&s.x, s.t)?.abs() * p.asymmetry.evaluate(&s.x, s.t)?;
            if v > best.0 || best.1.is_none() {
                best = (v, Some(k));
            }
        }
        Ok(PairBound { pair: (p.i, p.j), gamma: best.0, point: best.1.map(|k| pts[k].clone()) })
    })?;
    Ok(InteractionBound { gamma: pairs.iter().map(|p| p.gamma).fold(0.0, f64::max), points: pts.len(), pairs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeThreshold {
    #[serde(serialize_with = "one_based")]
    pub node: usize,
    pub satisfied: bool,
    /// Largest required rate over samples.
    pub required: f64,
    /// Smallest `alpha_k = -a_kk` over samples.
    pub actual: f64,
    /// Smallest `alpha_k - threshold_k` over samples.
    pub margin: f64,
    pub point: SamplePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeWeight {
    /// Influence edge `from -> to`, i.e. the entry `a_{to,from}`.
    #[serde(serialize_with = "one_based")]
    pub edge: (usize, usize),
    /// Inflated sampled bound on `|d_to a_{to,from}|`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NyquistMargin {
    pub peak: f64,
    pub omega: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayCertificate {
    pub satisfied: bool,
    pub gamma: InteractionBound,
    pub inflation: f64,
    pub delays: Vec<EdgeDelay>,
    /// Bounds charged for feedback pairs carrying a delay.
    pub weights: Vec<EdgeWeight>,
    pub nodes: Vec<NodeThreshold>,
    /// Delayed edges outside any feedback pair; cascades tolerate delays.
    #[serde(serialize_with = "one_based")]
    pub cascade_edges: Vec<(usize, usize)>,
    pub nyquist: Option<NyquistMargin>,
    pub note: &'static str,
}

pub const DELAY_NOTE: &str = "every feedback pair with a delayed edge charges half of each edge's bound |d_p a_pq| to \
     both endpoints; for two nodes this is alpha_1 > (b_dot/2 + Gamma)/b and alpha_2 > Gamma, and the general case is \
     this tool's reading of the two-node construction";

/// Rate requirements making a chain network contracting for any constant
/// delays on the listed edges.
pub fn delay_robust_rates(net: &SignedNetwork, delays: &[EdgeDelay], inflation: f64) -> Result<DelayCertificate, DelayError> {
    let n = net.dim();
    for d in delays {
        if d.from >= n || d.to >= n {
            return Err(DelayError::Edge { from: d.from, to: d.to, n });
        }
    }
    if let Some(p) = net.pairs().iter().find(|p| p.violation.is_some()) {
        return Err(DelayError::Asymmetry(p.i, p.j));
    }
    let dec = decompose_chains(net)?;
    let gamma = interaction_bound(net)?;
    let pts = bound_points(net);
    let jac = net.jacobian();

    let mut metrics: Vec<DiagonalMetric> = dec.singletons.iter().map(|&k| DiagonalMetric::unit(k)).collect();
    for c in &dec.chains {
        metrics.push(build_chain_metric(c, net)?);
    }
    let metric_of = |k: usize| metrics.iter().find(|m| m.order.contains(&k)).expect("every node has a metric");

    // feedback pairs that carry at least one positive delay
    let mut delayed_pairs = Vec::new();
    let mut cascade_edges = Vec::new();
    for d in delays.iter().filter(|d| d.delay > 0.0) {
        match net.pair_index(d.from, d.to) {
            Some(ix) if !delayed_pairs.contains(&ix) => delayed_pairs.push(ix),
            Some(_) => {}
            None => cascade_edges.push((d.from, d.to)),
        }
    }
    delayed_pairs.sort_unstable();

    let mut weights = Vec::new();
    for &ix in &delayed_pairs {
        let p = &net.pairs()[ix];
        for (to, from) in [(p.i, p.j), (p.j, p.i)] {
            let m = metric_of(to);
            let slot = m.order.iter().position(|&k| k == to).unwrap();
            let mut bound = 0.0f64;
            for s in &pts {
                let d = m.evaluate(&s.x, s.t)?.d[slot];
                bound = bound.max((d * jac[to][from].evaluate(&s.x, s.t)?).abs());
            }
            weights.push(EdgeWeight { edge: (from, to), bound: inflation * bound });
        }
    }
    // both edge bounds of a delayed pair are charged to each endpoint
    let mut charge = vec![0.0; n];
    for pair in weights.chunks(2) {
        let total = pair[0].bound + pair[1].bound;
        charge[pair[0].edge.0] += total;
        charge[pair[0].edge.1] += total;
    }

    let nodes: Vec<usize> = (0..n).collect();
    let nodes = par::try_map(net.config().parallel, &nodes, |&k| {
        let m = metric_of(k);
        let slot = m.order.iter().position(|&q| q == k).unwrap();
        let mut required = f64::NEG_INFINITY;
        let mut actual = f64::INFINITY;
        let mut worst = (f64::INFINITY, 0);
        for (ix, s) in net.points().iter().enumerate() {
            let v = m.evaluate(&s.x, s.t)?;
            let threshold = (0.5 * v.d_dot[slot] + 0.5 * charge[k]) / v.d[slot];
            let alpha = -jac[k][k].evaluate(&s.x, s.t)?;
            required = required.max(threshold);
            actual = actual.min(alpha);
            if alpha - threshold < worst.0 {
                worst = (alpha - threshold, ix);
            }
        }
        Ok::<_, DelayError>(NodeThreshold {
            node: k,
            satisfied: worst.0 > net.config().positivity_margin,
            required,
            actual,
            margin: worst.0,
            point: net.points()[worst.1].clone(),
        })
    })?;

    let nyquist = lti_pair(net).map(|(a1, a2, a12, b12)| lti_nyquist_margin(a1, a2, a12, b12, &log_omega_grid(1e-3, 1e3, 10_000)));
    Ok(DelayCertificate {
        satisfied: nodes.iter().all(|t| t.satisfied),
        gamma,
        inflation,
        delays: delays.to_vec(),
        weights,
        nodes,
        cascade_edges,
        nyquist,
        note: DELAY_NOTE,
    })
}

/// `(alpha1, alpha2, a12, b12)` for a constant two-node feedback pair.
fn lti_pair(net: &SignedNetwork) -> Option<(f64, f64, f64, f64)> {
    if net.dim() != 2 || net.pairs().len() != 1 {
        return None;
    }
    let jac = net.jacobian();
    let c = |i: usize, j: usize| jac[i][j].as_const();
    let b = net.pairs()[0].asymmetry.as_const()?;
    Some((-c(0, 0)?, -c(1, 1)?, c(0, 1)?, b))
}

/// `n` log-spaced frequencies in `[lo, hi]`.
pub fn log_omega_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect(),
    }
}

/// Peak of `|L(i w)| = a12^2 b12 / (|i w + alpha1| |i w + alpha2|)` over
/// `omega` and `w = 0`. A peak below 1 certifies the two-node loop for all
/// delays.
pub fn lti_nyquist_margin(alpha1: f64, alpha2: f64, a12: f64, b12: f64, omega: &[f64]) -> NyquistMargin {
    let gain = a12 * a12 * b12.abs();
    let mut best = NyquistMargin { peak: f64::NEG_INFINITY, omega: 0.0, certified: false };
    for &w in std::iter::once(&0.0).chain(omega) {
        let l = gain / ((w * w + alpha1 * alpha1).sqrt() * (w * w + alpha2 * alpha2).sqrt());
        if l > best.peak {
            best.peak = l;
            best.omega = w;
        }
    }
    best.certified = best.peak < 1.0 && alpha1 > 0.0 && alpha2 > 0.0;
    best
}
