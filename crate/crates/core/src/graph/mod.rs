//! The signed interaction network of a system and its structural checks.
//!
//! An edge `x_j -> x_i` exists when the Jacobian entry `a_ij = df_i/dx_j` is
//! not identically zero on the region. A reciprocal pair `{i, j}` carries the
//! asymmetry `b_ij` with `a_ji = -b_ij * a_ij`, kept as an expression.

mod chains;
mod cycles;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::expr::{add, div, mul, neg, total_time_derivative, DynamicsSpec, EvalError, Expr, DEFAULT_ZERO_TOLERANCE};
use crate::par;
use crate::region::{Region, RegionError, SamplePoint};
use crate::report::one_based;

pub use chains::{decompose_chains, decompose_digraph, CascadeEdge, CascadeVertex, Chain, ChainDecomposition, DecomposeError, Step};
pub use cycles::{find_long_cycles, CycleSearch, Digraph, DEFAULT_CYCLE_CAP};

/// Sampling and tolerance settings shared by every region-based check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkConfig {
    pub samples: usize,
    pub seed: u64,
    pub zero_tol: f64,
    pub positivity_margin: f64,
    pub residual_tol: f64,
    #[serde(skip)]
    pub parallel: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            samples: 256,
            seed: 42,
            zero_tol: DEFAULT_ZERO_TOLERANCE,
            positivity_margin: 1e-9,
            residual_tol: 1e-6,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignClass {
    AlwaysPositive,
    AlwaysNegative,
    SignVarying,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub expr: Expr,
    pub sign: SignClass,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairViolationKind {
    /// `b_ij` below the positivity margin.
    NonPositive,
    /// `a_ij` vanishes while `a_ji` does not, so no finite `b_ij` exists.
    UndefinedRatio,
    /// The stored `b_ij` does not reproduce `a_ji = -b_ij * a_ij`.
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairViolation {
    pub kind: PairViolationKind,
    pub point: SamplePoint,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocalPair {
    /// Lower node index (0-based).
    pub i: usize,
    /// Higher node index (0-based).
    pub j: usize,
    /// `b_ij` with `a_ji = -b_ij * a_ij`.
    pub asymmetry: Expr,
    /// Derivative of `b_ij` along trajectories.
    pub rate: Expr,
    /// `a_ji + b_ij * a_ij` simplifies to zero.
    pub exact: bool,
    pub constant: bool,
    /// Largest relative residual `|a_ji + b a_ij| / (1 + |a_ji|)` over samples.
    pub residual: f64,
    pub min_value: f64,
    pub max_value: f64,
    pub violation: Option<PairViolation>,
}

impl ReciprocalPair {
    pub fn nodes(&self) -> (usize, usize) {
        (self.i, self.j)
    }

    /// `b` oriented from `from`'s point of view: `b_ij` for the lower node,
    /// `1 / b_ij` for the higher one. Returns the exponent (+1 or -1).
    pub fn orientation(&self, from: usize) -> f64 {
        if from == self.i {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct SignedNetwork {
    n: usize,
    dynamics: DynamicsSpec,
    region: Region,
    config: NetworkConfig,
    points: Vec<SamplePoint>,
    jacobian: Vec<Vec<Expr>>,
    diagonal: Vec<Entry>,
    /// Keyed by `(i, j)` for the edge `x_j -> x_i`.
    edges: BTreeMap<(usize, usize), Entry>,
    pairs: Vec<ReciprocalPair>,
}

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("evaluating a{}{}: {source}", .row + 1, .col + 1)]
    Eval {
        row: usize,
        col: usize,
        #[source]
        source: EvalError,
    },
    #[error("evaluating b{}{}: {source}", .i + 1, .j + 1)]
    Asymmetry {
        i: usize,
        j: usize,
        #[source]
        source: EvalError,
    },
}

impl SignedNetwork {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn dynamics(&self) -> &DynamicsSpec {
        &self.dynamics
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn points(&self) -> &[SamplePoint] {
        &self.points
    }

    pub fn jacobian(&self) -> &[Vec<Expr>] {
        &self.jacobian
    }

    /// Self entry `a_ii`.
    pub fn diagonal(&self, i: usize) -> &Entry {
        &self.diagonal[i]
    }

    /// Entry for the edge `x_j -> x_i`, if present.
    pub fn edge(&self, i: usize, j: usize) -> Option<&Entry> {
        self.edges.get(&(i, j))
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains_key(&(i, j))
    }

    /// All edges as `((i, j), entry)` for `x_j -> x_i`, in index order.
    pub fn edges(&self) -> impl Iterator<Item = (&(usize, usize), &Entry)> {
        self.edges.iter()
    }

    pub fn pairs(&self) -> &[ReciprocalPair] {
        &self.pairs
    }

    pub fn pair(&self, p: usize, q: usize) -> Option<&ReciprocalPair> {
        let (i, j) = if p < q { (p, q) } else { (q, p) };
        self.pairs.iter().find(|pr| pr.i == i && pr.j == j)
    }

    pub fn pair_index(&self, p: usize, q: usize) -> Option<usize> {
        let (i, j) = if p < q { (p, q) } else { (q, p) };
        self.pairs.iter().position(|pr| pr.i == i && pr.j == j)
    }

    /// Influence graph: `u -> v` whenever `x_u` enters `f_v`.
    pub fn digraph(&self) -> Digraph {
        let mut g = Digraph::new(self.n);
        for &(i, j) in self.edges.keys() {
            g.add_edge(j, i);
        }
        g
    }
}

/// Differentiates, samples and classifies the Jacobian of `dynamics` over
/// `region`, and estimates the asymmetry of every reciprocal pair.
pub fn build_network(dynamics: &DynamicsSpec, region: &Region, config: &NetworkConfig) -> Result<SignedNetwork, NetworkError> {
    let n = dynamics.dim();
    region.check_dim(n)?;
    if config.samples < 2 {
        return Err(RegionError::TooFewSamples { min: 2, got: config.samples }.into());
    }
    let points = region.sample(config.samples, config.seed);
    let jacobian = dynamics.jacobian();

    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let entries = par::try_map(config.parallel, &cells, |&(i, j)| {
        classify(&jacobian[i][j], &points, config.zero_tol).map_err(|source| NetworkError::Eval { row: i, col: j, source })
    })?;

    let mut diagonal = Vec::with_capacity(n);
    let mut edges = BTreeMap::new();
    for ((i, j), entry) in cells.iter().copied().zip(entries) {
        if i == j {
            diagonal.push(entry);
        } else if entry.sign != SignClass::Zero {
            edges.insert((i, j), entry);
        }
    }

    let candidates: Vec<(usize, usize)> = edges
        .keys()
        .filter(|&&(i, j)| i < j && edges.contains_key(&(j, i)))
        .copied()
        .collect();
    let pairs = par::try_map(config.parallel, &candidates, |&(i, j)| {
        estimate_pair(i, j, &jacobian, dynamics, &points, config)
    })?;

    Ok(SignedNetwork {
        n,
        dynamics: dynamics.clone(),
        region: region.clone(),
        config: config.clone(),
        points,
        jacobian,
        diagonal,
        edges,
        pairs,
    })
}

fn classify(e: &Expr, points: &[SamplePoint], tol: f64) -> Result<Entry, EvalError> {
    if e.is_zero() {
        return Ok(Entry { expr: e.clone(), sign: SignClass::Zero, min: 0.0, max: 0.0 });
    }
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut pos, mut neg, mut zero) = (true, true, true);
    for p in points {
        let v = e.evaluate(&p.x, p.t)?;
        min = min.min(v);
        max = max.max(v);
        pos &= v > tol;
        neg &= v < -tol;
        zero &= v.abs() < tol;
    }
    let sign = if zero {
        SignClass::Zero
    } else if pos {
        SignClass::AlwaysPositive
    } else if neg {
        SignClass::AlwaysNegative
    } else {
        SignClass::SignVarying
    };
    Ok(Entry { expr: e.clone(), sign, min, max })
}

struct PairScan {
    residual: (f64, usize),
    min: (f64, usize),
    max: f64,
    undefined: Option<(usize, f64)>,
}

fn scan_pair(
    b: &Expr,
    aij: &Expr,
    aji: &Expr,
    points: &[SamplePoint],
    zero_tol: f64,
) -> Result<PairScan, EvalError> {
    let mut scan = PairScan { residual: (0.0, 0), min: (f64::INFINITY, 0), max: f64::NEG_INFINITY, undefined: None };
    for (k, p) in points.iter().enumerate() {
        // the entries were evaluated successfully during classification
        let u = aij.evaluate(&p.x, p.t)?;
        let v = aji.evaluate(&p.x, p.t)?;
        let bv = match b.evaluate(&p.x, p.t) {
            Ok(bv) => bv,
            Err(_) if u.abs() < zero_tol => {
                if v.abs() >= zero_tol && scan.undefined.is_none() {
                    scan.undefined = Some((k, v));
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let r = (v + bv * u).abs() / (1.0 + v.abs());
        if r > scan.residual.0 {
            scan.residual = (r, k);
        }
        if bv < scan.min.0 {
            scan.min = (bv, k);
        }
        scan.max = scan.max.max(bv);
    }
    Ok(scan)
}

fn estimate_pair(
    i: usize,
    j: usize,
    jacobian: &[Vec<Expr>],
    dynamics: &DynamicsSpec,
    points: &[SamplePoint],
    config: &NetworkConfig,
) -> Result<ReciprocalPair, NetworkError> {
    let aij = &jacobian[i][j];
    let aji = &jacobian[j][i];
    let wrap = |source| NetworkError::Asymmetry { i, j, source };

    let raw = div(neg(aji.clone()), aij.clone());
    let simplified = raw.simplify();
    let exact = add(aji.clone(), mul(simplified.clone(), aij.clone())).simplify().is_zero();

    let mut asymmetry = simplified;
    let mut scan = scan_pair(&asymmetry, aij, aji, points, config.zero_tol).map_err(wrap)?;
    if !exact && scan.residual.0 > config.residual_tol {
        asymmetry = raw;
        scan = scan_pair(&asymmetry, aij, aji, points, config.zero_tol).map_err(wrap)?;
    }

    let violation = if let Some((k, v)) = scan.undefined {
        Some(PairViolation { kind: PairViolationKind::UndefinedRatio, point: points[k].clone(), value: v })
    } else if scan.min.0 < config.positivity_margin {
        Some(PairViolation { kind: PairViolationKind::NonPositive, point: points[scan.min.1].clone(), value: scan.min.0 })
    } else if scan.residual.0 > config.residual_tol {
        let (r, k) = scan.residual;
        Some(PairViolation { kind: PairViolationKind::Residual, point: points[k].clone(), value: r })
    } else {
        None
    };

    Ok(ReciprocalPair {
        i,
        j,
        constant: asymmetry.is_constant(),
        rate: total_time_derivative(&asymmetry, dynamics),
        asymmetry,
        exact,
        residual: scan.residual.0,
        min_value: scan.min.0,
        max_value: scan.max,
        violation,
    })
}

/// The feedback neighbours `N_i`: nodes `j != i` with edges both ways.
pub fn feedback_neighbors(net: &SignedNetwork, i: usize) -> BTreeSet<usize> {
    net.pairs
        .iter()
        .filter_map(|p| {
            if p.i == i {
                Some(p.j)
            } else if p.j == i {
                Some(p.i)
            } else {
                None
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    #[serde(serialize_with = "one_based")]
    pub pair: (usize, usize),
    pub asymmetry: String,
    pub exact: bool,
    pub constant: bool,
    pub residual: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairWitness {
    #[serde(serialize_with = "one_based")]
    pub pair: (usize, usize),
    #[serde(flatten)]
    pub violation: PairViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionI {
    pub satisfied: bool,
    pub pairs: Vec<PairSummary>,
    pub violations: Vec<PairWitness>,
}

/// Opposite signs of reciprocal interactions: `b_ij > 0` at every sample of
/// the network.
pub fn check_condition_i(net: &SignedNetwork) -> ConditionI {
    let pairs = net
        .pairs
        .iter()
        .map(|p| PairSummary {
            pair: p.nodes(),
            asymmetry: p.asymmetry.to_string(),
            exact: p.exact,
            constant: p.constant,
            residual: p.residual,
            min: p.min_value,
            max: p.max_value,
        })
        .collect();
    let violations: Vec<PairWitness> = net
        .pairs
        .iter()
        .filter_map(|p| p.violation.clone().map(|violation| PairWitness { pair: p.nodes(), violation }))
        .collect();
    ConditionI { satisfied: violations.is_empty(), pairs, violations }
}
