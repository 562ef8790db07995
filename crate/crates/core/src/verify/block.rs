//! Conditions for networks of vector-valued modules with block metrics.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::expr::{div, neg, total_time_derivative, EvalError, Expr};
use crate::graph::{find_long_cycles, CycleSearch, Digraph, SignedNetwork};
use crate::metric::{check_block_compatibility, check_block_condition_ii, BlockCompatibility, BlockMetric, JacobianSample};
use crate::par;
use crate::region::SamplePoint;
use crate::report::one_based;

use super::conditions::jacobian_block;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulePair {
    #[serde(serialize_with = "one_based")]
    pub modules: (usize, usize),
    /// Entry `(p, q)` of `A_IJ` whose ratio defines `b_IJ`, if any.
    #[serde(serialize_with = "one_based")]
    pub entry: Option<(usize, usize)>,
    pub asymmetry: Option<String>,
    pub satisfied: bool,
    pub min_value: f64,
    /// Largest `||A_JI + b_IJ A_IJ^T||_F / (1 + ||A_JI||_F)`.
    pub max_relative_residual: f64,
    pub point: Option<SamplePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuleRate {
    #[serde(serialize_with = "one_based")]
    pub module: usize,
    pub satisfied: bool,
    pub max_eigenvalue: f64,
    pub point: SamplePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockReport {
    pub satisfied: bool,
    #[serde(serialize_with = "one_based")]
    pub modules: Vec<Vec<usize>>,
    pub pairs: Vec<ModulePair>,
    /// Long cycles of the module-level influence graph.
    pub cycles: CycleSearch,
    pub compatibility: BlockCompatibility,
    pub condition_ii: Vec<ModuleRate>,
}

struct PairData {
    modules: (usize, usize),
    asymmetry: Option<(Expr, Expr)>,
    report: ModulePair,
}

/// Module-level version of the three conditions plus metric compatibility
/// `M_I A_IJ = A_IJ M_J`.
pub fn check_block_conditions(
    net: &SignedNetwork,
    metric: &BlockMetric,
    margin: f64,
    cycle_cap: usize,
) -> Result<BlockReport, EvalError> {
    let cfg = net.config();
    let modules = metric.modules();
    let mut module_of = vec![0; net.dim()];
    for (m, block) in modules.iter().enumerate() {
        for &k in block {
            module_of[k] = m;
        }
    }
    let mut g = Digraph::new(modules.len());
    for (u, v) in net.digraph().edges() {
        g.add_edge(module_of[u], module_of[v]);
    }
    let coupled: BTreeSet<(usize, usize)> = g.edges().map(|(a, b)| (a.min(b), a.max(b))).collect();

    let all: Vec<usize> = (0..net.dim()).collect();
    let samples = par::try_map(cfg.parallel, net.points(), |p| {
        Ok::<_, EvalError>(JacobianSample { point: p.clone(), a: jacobian_block(net, &all, &p.x, p.t)? })
    })?;

    let mut pairs = Vec::new();
    for &(mi, mj) in &coupled {
        let entry = modules[mi]
            .iter()
            .flat_map(|&p| modules[mj].iter().map(move |&q| (p, q)))
            .find(|&(p, q)| net.has_edge(p, q));
        let mut report = ModulePair {
            modules: (mi, mj),
            entry,
            asymmetry: None,
            satisfied: false,
            min_value: f64::NAN,
            max_relative_residual: f64::NAN,
            point: None,
        };
        let Some((p, q)) = entry else {
            pairs.push(PairData { modules: (mi, mj), asymmetry: None, report });
            continue;
        };
        let jac = net.jacobian();
        let b = div(neg(jac[q][p].clone()), jac[p][q].clone()).simplify();
        let rate = total_time_derivative(&b, net.dynamics()).simplify();
        report.asymmetry = Some(b.to_string());
        let (mut min_b, mut worst) = ((f64::INFINITY, 0), (0.0f64, 0));
        for (k, s) in samples.iter().enumerate() {
            let bv = b.evaluate(&s.point.x, s.point.t)?;
            let aij = metric.block(&s.a, mi, mj);
            let aji = metric.block(&s.a, mj, mi);
            let rel = (&aji + aij.transpose() * bv).norm() / (1.0 + aji.norm());
            if bv < min_b.0 {
                min_b = (bv, k);
            }
            if rel > worst.0 {
                worst = (rel, k);
            }
        }
        let positive = min_b.0 >= cfg.positivity_margin;
        let matched = worst.0 <= cfg.residual_tol;
        report.min_value = min_b.0;
        report.max_relative_residual = worst.0;
        report.satisfied = positive && matched;
        report.point = match (positive, matched) {
            (false, _) => Some(samples[min_b.1].point.clone()),
            (true, false) => Some(samples[worst.1].point.clone()),
            _ => None,
        };
        pairs.push(PairData { modules: (mi, mj), asymmetry: Some((b, rate)), report });
    }

    let ordered: Vec<(usize, usize)> = coupled.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
    let compatibility = check_block_compatibility(metric, &samples, &ordered);

    let mut condition_ii = Vec::new();
    for m in 0..modules.len() {
        let mut a_ii = Vec::with_capacity(samples.len());
        let mut rates = Vec::with_capacity(samples.len());
        for s in &samples {
            let mut r = 0.0;
            for d in &pairs {
                let Some((b, rate)) = &d.asymmetry else { continue };
                let e = if d.modules.0 == m {
                    1.0
                } else if d.modules.1 == m {
                    -1.0
                } else {
                    continue;
                };
                r += e * rate.evaluate(&s.point.x, s.point.t)? / b.evaluate(&s.point.x, s.point.t)?;
            }
            a_ii.push(metric.block(&s.a, m, m));
            rates.push(r);
        }
        let c = check_block_condition_ii(metric.matrix(m), &a_ii, &rates, margin);
        condition_ii.push(ModuleRate {
            module: m,
            satisfied: c.satisfied,
            max_eigenvalue: c.max_eigenvalue,
            point: samples[c.worst_sample].point.clone(),
        });
    }

    let cycles = find_long_cycles(&g, cycle_cap);
    let pairs: Vec<ModulePair> = pairs.into_iter().map(|d| d.report).collect();
    Ok(BlockReport {
        satisfied: cycles.is_empty()
            && pairs.iter().all(|p| p.satisfied)
            && compatibility.satisfied
            && condition_ii.iter().all(|c| c.satisfied),
        modules: modules.to_vec(),
        pairs,
        cycles,
        compatibility,
        condition_ii,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::DynamicsSpec;
    use crate::graph::{build_network, NetworkConfig};
    use crate::region::Region;
    use nalgebra::DMatrix;

    fn network(f: &[&str]) -> SignedNetwork {
        let d = DynamicsSpec::parse(f).unwrap();
        let r = Region::cube(f.len(), -1.0, 1.0, (0.0, 1.0)).unwrap();
        build_network(&d, &r, &NetworkConfig { samples: 64, ..NetworkConfig::default() }).unwrap()
    }

    // modules {x1, x2} and {x3, x4}: A_21 = -2 A_12^T
    const COUPLED: [&str; 4] = [
        "-x1 + x2 + x3",
        "-x1 - x2 + x4",
        "-2*x1 - x3 + x4",
        "-2*x2 - x3 - x4",
    ];

    #[test]
    fn identity_blocks_pass() {
        let net = network(&COUPLED);
        let m = BlockMetric::identity(vec![vec![0, 1], vec![2, 3]]);
        let r = check_block_conditions(&net, &m, 1e-9, 100).unwrap();
        assert!(r.satisfied, "{r:?}");
        assert_eq!(r.pairs[0].asymmetry.as_deref(), Some("2"));
        assert!(r.cycles.is_empty());
        for c in &r.condition_ii {
            assert!((c.max_eigenvalue + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_transpose_fails() {
        let mut f = COUPLED;
        f[3] = "-3*x2 - x3 - x4";
        let net = network(&f);
        let r = check_block_conditions(&net, &BlockMetric::identity(vec![vec![0, 1], vec![2, 3]]), 1e-9, 100).unwrap();
        assert!(!r.satisfied);
        assert!(!r.pairs[0].satisfied && r.pairs[0].point.is_some());
    }

    #[test]
    fn incompatible_metric_fails() {
        let net = network(&COUPLED);
        let m = BlockMetric::new(
            vec![vec![0, 1], vec![2, 3]],
            vec![DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])],
        )
        .unwrap();
        let r = check_block_conditions(&net, &m, 1e-9, 100).unwrap();
        assert!(!r.compatibility.satisfied);
        assert!(!r.satisfied);
    }

    #[test]
    fn one_directional_coupling_fails() {
        let net = network(&["-x1", "-x2", "x1 - x3", "-x4"]);
        let r = check_block_conditions(&net, &BlockMetric::identity(vec![vec![0, 1], vec![2, 3]]), 1e-9, 100).unwrap();
        assert_eq!(r.pairs[0].entry, None);
        assert!(!r.satisfied);
    }
}
