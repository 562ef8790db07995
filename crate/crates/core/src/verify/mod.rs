//! Sign-stability verdict: conditions (i)-(iii) plus numerical certificates.

mod averaging;
mod block;
mod conditions;
mod text;

pub use averaging::{averaged_jacobian_check, uniform_grid, AveragedCheck, AveragingError};
pub use block::{check_block_conditions, BlockReport, ModulePair, ModuleRate};
pub use text::{format_point, render_condition_i, render_condition_iii, render_text};
pub use conditions::{
    check_condition_ii, check_lmi, jacobian_block, neighbor_log_rate, ConditionIi, LmiCheck, LmiError, NodeMargin,
    OFF_DIAGONAL_TOLERANCE,
};

use serde::Serialize;

use crate::delay::DelayCertificate;
use crate::expr::DynamicsSpec;
use crate::graph::{
    build_network, check_condition_i, decompose_chains, find_long_cycles, CascadeVertex, ChainDecomposition,
    ConditionI, CycleSearch, NetworkConfig, NetworkError, SignedNetwork, DEFAULT_CYCLE_CAP,
};
use crate::metric::{
    assemble_cascade_report, build_chain_metric, vertex_name, BlockMetric, CascadeReport, DiagonalMetric,
    MetricSummary,
};
use crate::region::Region;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub network: NetworkConfig,
    /// Required `-max eig L(A, M)` for a certificate.
    pub lmi_margin: f64,
    pub cycle_cap: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { network: NetworkConfig::default(), lmi_margin: 1e-9, cycle_cap: DEFAULT_CYCLE_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionIii {
    pub satisfied: bool,
    #[serde(flatten)]
    pub search: CycleSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conditions {
    pub i: ConditionI,
    /// Absent when the rates could not be evaluated (see `errors`).
    pub ii: Option<ConditionIi>,
    pub iii: ConditionIii,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub vertex: CascadeVertex,
    pub name: String,
    pub metric: MetricSummary,
    pub lmi: Option<LmiCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sampling {
    pub region: Region,
    pub samples: usize,
    pub seed: u64,
    pub zero_tol: f64,
    pub positivity_margin: f64,
    pub residual_tol: f64,
    pub lmi_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub schema: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub sign_stable: bool,
    pub verdict: &'static str,
    /// Names of the failed checks behind a negative verdict.
    pub failed: Vec<String>,
    pub conditions: Conditions,
    pub constant_asymmetry_shortcut: bool,
    pub decomposition: Option<ChainDecomposition>,
    pub certificates: Vec<Certificate>,
    pub cascade: Option<CascadeReport>,
    pub block: Option<BlockReport>,
    /// Delay certificate, attached by callers that have delay data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay: Option<DelayCertificate>,
    pub sampling: Sampling,
    pub errors: Vec<StageError>,
    pub notes: Vec<String>,
}

pub const INVARIANCE_NOTE: &str =
    "conclusions hold for trajectories that remain in the sampled region; forward invariance is not checked";

/// Builds the signed network and runs every check.
pub fn sign_stability_verdict(
    dynamics: &DynamicsSpec,
    region: &Region,
    config: &VerifyConfig,
    block: Option<&BlockMetric>,
) -> Result<StabilityReport, NetworkError> {
    let net = build_network(dynamics, region, &config.network)?;
    Ok(verify_network(&net, config, block))
}

pub fn verify_network(net: &SignedNetwork, config: &VerifyConfig, block: Option<&BlockMetric>) -> StabilityReport {
    let mut errors = Vec::new();
    let mut notes = vec![
        INVARIANCE_NOTE.to_string(),
        format!(
            "sign classes, asymmetries and rates are checked at {} quasi-random samples (seed {}), not proven",
            net.points().len(),
            net.config().seed
        ),
    ];
    let stage_error = |stage: &str, message: String| StageError { stage: stage.to_string(), message };

    let i = check_condition_i(net);
    let ii = match check_condition_ii(net) {
        Ok(c) => Some(c),
        Err(e) => {
            errors.push(stage_error("condition (ii)", e.to_string()));
            None
        }
    };
    let search = find_long_cycles(&net.digraph(), config.cycle_cap);
    let iii = ConditionIii { satisfied: search.is_empty(), search };
    let shortcut = ii.as_ref().is_some_and(|c| c.constant_asymmetry_shortcut);

    let mut decomposition = None;
    if iii.satisfied {
        match decompose_chains(net) {
            Ok(d) => decomposition = Some(d),
            Err(e) => errors.push(stage_error("decomposition", e.to_string())),
        }
    }

    let mut certificates = Vec::new();
    let mut cascade = None;
    match (&decomposition, i.satisfied) {
        (Some(dec), true) => {
            let mut contracting = Vec::new();
            for &vertex in &dec.vertices {
                let name = vertex_name(dec, vertex);
                let metric = match vertex {
                    CascadeVertex::Chain(c) => build_chain_metric(&dec.chains[c], net),
                    CascadeVertex::Node(k) => Ok(DiagonalMetric::unit(k)),
                };
                let metric = match metric {
                    Ok(m) => m,
                    Err(e) => {
                        errors.push(stage_error("metric", format!("{name}: {e}")));
                        contracting.push(false);
                        continue;
                    }
                };
                let lmi = match check_lmi(net, &metric, config.lmi_margin) {
                    Ok(l) => Some(l),
                    Err(e) => {
                        errors.push(stage_error("lmi", format!("{name}: {e}")));
                        None
                    }
                };
                contracting.push(lmi.as_ref().is_some_and(|l| l.satisfied));
                certificates.push(Certificate { vertex, name, metric: MetricSummary::from(&metric), lmi });
            }
            cascade = Some(assemble_cascade_report(dec, &contracting));
        }
        (Some(_), false) => notes.push("no contraction certificate: condition (i) fails, so the chain metric is undefined".into()),
        _ => {}
    }

    let block = block.and_then(|m| match check_block_conditions(net, m, config.lmi_margin, config.cycle_cap) {
        Ok(r) => Some(r),
        Err(e) => {
            errors.push(stage_error("block", e.to_string()));
            None
        }
    });

    let mut failed = Vec::new();
    let sign_stable = if let Some(b) = &block {
        notes.push("verdict uses the module-level conditions with the supplied block metrics".into());
        if !b.satisfied {
            failed.push("block conditions".to_string());
        }
        b.satisfied
    } else if block_requested_but_failed(&errors) {
        failed.push("block conditions".to_string());
        false
    } else {
        for (ok, label) in [
            (i.satisfied, "condition (i)"),
            (ii.as_ref().is_some_and(|c| c.satisfied), "condition (ii)"),
            (iii.satisfied, "condition (iii)"),
        ] {
            if !ok {
                failed.push(label.to_string());
            }
        }
        failed.is_empty()
    };
    if iii.search.truncated {
        notes.push(format!("cycle enumeration stopped after {} cycles", config.cycle_cap));
    }
    if shortcut {
        notes.push("all asymmetries are constant, so condition (ii) reduces to positive self rates".into());
    }
    if let Some(c) = &cascade {
        if sign_stable && !c.contracting {
            notes.push(format!("sampled LMI did not certify: {}", c.failing.join("; ")));
        }
    }

    let cfg = net.config();
    StabilityReport {
        schema: REPORT_SCHEMA,
        name: None,
        sign_stable,
        verdict: if sign_stable { "sign-stable" } else { "not sign-stable" },
        failed,
        conditions: Conditions { i, ii, iii },
        constant_asymmetry_shortcut: shortcut,
        decomposition,
        certificates,
        cascade,
        block,
        delay: None,
        sampling: Sampling {
            region: net.region().clone(),
            samples: cfg.samples,
            seed: cfg.seed,
            zero_tol: cfg.zero_tol,
            positivity_margin: cfg.positivity_margin,
            residual_tol: cfg.residual_tol,
            lmi_margin: config.lmi_margin,
        },
        errors,
        notes,
    }
}

fn block_requested_but_failed(errors: &[StageError]) -> bool {
    errors.iter().any(|e| e.stage == "block")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verdict(f: &[&str], lo: f64, hi: f64) -> StabilityReport {
        let d = DynamicsSpec::parse(f).unwrap();
        let r = Region::cube(f.len(), lo, hi, (0.0, 10.0)).unwrap();
        sign_stability_verdict(&d, &r, &VerifyConfig::default(), None).unwrap()
    }

    #[test]
    fn example_one_is_sign_stable() {
        let r = verdict(&["-x1 - x1*x2", "x1^2 - x2 - x2*x3", "x2^2 - x3"], -0.9, 3.0);
        assert!(r.sign_stable, "{:?}", r.failed);
        assert!(r.constant_asymmetry_shortcut);
        assert!(r.errors.is_empty());
        let c = r.cascade.unwrap();
        assert!(c.contracting);
        assert_eq!(r.certificates.len(), 1);
        let lmi = r.certificates[0].lmi.as_ref().unwrap();
        assert!(lmi.satisfied && lmi.diagonal);
    }

    #[test]
    fn ring_fails_condition_iii_only() {
        let r = verdict(&["-x1 + x3", "x1 - x2", "x2 - x3"], -1.0, 1.0);
        assert!(!r.sign_stable);
        assert_eq!(r.conditions.iii.search.cycles, vec![vec![0, 1, 2]]);
        assert!(r.decomposition.is_none());
        assert!(r.failed.contains(&"condition (iii)".to_string()));
    }

    #[test]
    fn mutual_activation_fails_condition_i() {
        let r = verdict(&["-x1 + x2", "x1 - x2"], -1.0, 1.0);
        assert!(!r.sign_stable);
        assert_eq!(r.failed, vec!["condition (i)".to_string()]);
        assert!(r.cascade.is_none());
    }

    #[test]
    fn report_serializes_one_based() {
        let r = verdict(&["-x1 + x2", "-x1 - x2"], -1.0, 1.0);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["decomposition"]["chains"][0]["nodes"], serde_json::json!([1, 2]));
        assert_eq!(v["conditions"]["ii"]["nodes"][1]["node"], 2);
        let text = render_text(&r);
        assert!(text.starts_with("verdict: sign-stable\n"), "{text}");
        assert!(text.contains("chain 1 {x1, x2}: d1 = b12, d2 = 1"));
    }

    #[test]
    fn block_metric_overrides_scalar_verdict() {
        // the scalar graph has the 4-cycle x1 -> x3 -> x4 -> x2 -> x1, the
        // module graph only a 2-cycle
        let f = ["-x1 + x2 + x3", "-x1 - x2 + x4", "-2*x1 - x3 + x4", "-2*x2 - x3 - x4"];
        let d = DynamicsSpec::parse(&f).unwrap();
        let region = Region::cube(4, -1.0, 1.0, (0.0, 1.0)).unwrap();
        let m = BlockMetric::identity(vec![vec![0, 1], vec![2, 3]]);
        let r = sign_stability_verdict(&d, &region, &VerifyConfig::default(), Some(&m)).unwrap();
        assert!(!r.conditions.iii.satisfied);
        assert!(r.block.as_ref().unwrap().satisfied);
        assert!(r.sign_stable);
    }
}
