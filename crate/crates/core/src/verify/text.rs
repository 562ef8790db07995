//! Plain-text rendering of a `StabilityReport`.

use std::fmt::Write;

use crate::graph::{ConditionI, PairViolationKind};
use crate::region::SamplePoint;

use super::{ConditionIi, ConditionIii, StabilityReport};

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

pub fn format_point(p: &SamplePoint) -> String {
    let xs: Vec<String> = p.x.iter().map(|v| format!("{v:.4}")).collect();
    format!("x = ({}), t = {:.4}", xs.join(", "), p.t)
}

fn nodes(v: &[usize]) -> String {
    v.iter().map(|k| format!("x{}", k + 1)).collect::<Vec<_>>().join(" -> ")
}

pub fn render_condition_i(out: &mut String, c: &ConditionI) {
    let _ = writeln!(out, "condition (i)   opposite reciprocal signs     {}", mark(c.satisfied));
    for p in &c.pairs {
        let (i, j) = (p.pair.0 + 1, p.pair.1 + 1);
        let _ = writeln!(out, "  b{i}{j} = {}  (range [{:.6}, {:.6}])", p.asymmetry, p.min, p.max);
    }
    for w in &c.violations {
        let (i, j) = (w.pair.0 + 1, w.pair.1 + 1);
        let what = match w.violation.kind {
            PairViolationKind::NonPositive => format!("b{i}{j} = {:.6} is not positive", w.violation.value),
            PairViolationKind::UndefinedRatio => format!("a{i}{j} vanishes while a{j}{i} = {:.6}", w.violation.value),
            PairViolationKind::Residual => format!("a{j}{i} + b{i}{j} a{i}{j} = {:.3e}", w.violation.value),
        };
        let _ = writeln!(out, "  witness: {what} at {}", format_point(&w.violation.point));
    }
}

fn render_condition_ii(out: &mut String, c: Option<&ConditionIi>) {
    let Some(c) = c else {
        let _ = writeln!(out, "condition (ii)  self rates dominate           not evaluated");
        return;
    };
    let _ = writeln!(out, "condition (ii)  self rates dominate           {}", mark(c.satisfied));
    for m in &c.nodes {
        let _ = write!(out, "  x{}: min alpha {:.6}, margin {:.6}", m.node + 1, m.min_rate, m.margin);
        if m.satisfied {
            let _ = writeln!(out);
        } else {
            let _ = writeln!(out, "  FAILED at {}", format_point(&m.point));
        }
    }
}

pub fn render_condition_iii(out: &mut String, c: &ConditionIii) {
    let _ = writeln!(out, "condition (iii) no cycles of length >= 3      {}", mark(c.satisfied));
    for cycle in &c.search.cycles {
        let _ = writeln!(out, "  cycle: {} -> x{}", nodes(cycle), cycle[0] + 1);
    }
    if c.search.truncated {
        let _ = writeln!(out, "  (enumeration truncated)");
    }
}

pub fn render_text(r: &StabilityReport) -> String {
    let mut out = String::new();
    if let Some(name) = &r.name {
        let _ = writeln!(out, "model: {name}");
    }
    let _ = writeln!(out, "verdict: {}", r.verdict);
    if !r.failed.is_empty() {
        let _ = writeln!(out, "failed: {}", r.failed.join(", "));
    }
    render_condition_i(&mut out, &r.conditions.i);
    render_condition_ii(&mut out, r.conditions.ii.as_ref());
    render_condition_iii(&mut out, &r.conditions.iii);
    if r.constant_asymmetry_shortcut {
        let _ = writeln!(out, "constant asymmetries: condition (ii) reduces to alpha_i > 0");
    }

    for c in &r.certificates {
        let weights: Vec<String> = c.metric.weights.iter().map(|w| format!("d{} = {}", w.node + 1, w.product)).collect();
        let _ = writeln!(out, "{}: {}", c.name, weights.join(", "));
        if let Some(l) = &c.lmi {
            let _ = writeln!(
                out,
                "  max eig L(A, D) = {:.6e}, off-diagonal {:.3e}  {}",
                l.max_eigenvalue,
                l.max_off_diagonal,
                mark(l.satisfied)
            );
        }
    }
    if let Some(c) = &r.cascade {
        if c.edges.is_empty() {
            let _ = writeln!(out, "cascade: {} independent subsystem(s)", c.vertices.len());
        } else {
            let _ = writeln!(out, "cascade: {} subsystems, {} one-directional link(s)", c.vertices.len(), c.edges.len());
        }
    }
    if let Some(b) = &r.block {
        let _ = writeln!(out, "block conditions                              {}", mark(b.satisfied));
        for p in &b.pairs {
            let _ = writeln!(
                out,
                "  modules ({}, {}): b = {}  {}",
                p.modules.0 + 1,
                p.modules.1 + 1,
                p.asymmetry.as_deref().unwrap_or("undefined"),
                mark(p.satisfied)
            );
        }
        let _ = writeln!(out, "  metric compatibility  {}", mark(b.compatibility.satisfied));
        for m in &b.condition_ii {
            let _ = writeln!(out, "  module {}: max eig {:.6e}  {}", m.module + 1, m.max_eigenvalue, mark(m.satisfied));
        }
    }
    for e in &r.errors {
        let _ = writeln!(out, "error [{}]: {}", e.stage, e.message);
    }
    let s = &r.sampling;
    let _ = writeln!(out, "sampling: {} points, seed {}", s.samples, s.seed);
    for n in &r.notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}
