//! Complexity counts feeding the a-posteriori certificates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Result};
use crate::evaluate::ViolationRule;
use crate::model::{Decision, HorizonConfig, PerturbationCloud, Program, RequestSchedule, Scenario, ScenarioSet};

/// Relative activity tolerance: a row counts as tight within `tol·(1 + |rhs|)`.
pub const COMPLEXITY_TOL: f64 = 1e-6;

/// Coordinate tolerance deciding whether leave-one-out moved the optimizer.
pub const SOL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityKind {
    ExactSupport,
    Relaxed,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    RemovedChangesSolution,
    Active,
    Violated,
    HullActive,
    HullViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub index: usize,
    pub reason: Reason,
    /// 1-based step of the first qualifying row, when the reason is row-based.
    pub step: Option<usize>,
    /// Cloud point that qualified, for hull reasons.
    pub point: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub kind: ComplexityKind,
    pub count: usize,
    pub n: usize,
    pub member_indices: Vec<usize>,
    pub tolerance: f64,
    pub reasons: Vec<Membership>,
    /// Samples with binding rows whose removal leaves the optimizer unchanged.
    pub degenerate_indices: Vec<usize>,
    /// Set when the support samples alone do not reproduce the optimizer.
    pub assumption_suspect: bool,
    pub note: Option<String>,
}

impl ComplexityReport {
    fn from_members(kind: ComplexityKind, n: usize, tolerance: f64, mut reasons: Vec<Membership>) -> Self {
        reasons.sort_by_key(|m| m.index);
        let member_indices: Vec<usize> = reasons.iter().map(|m| m.index).collect();
        ComplexityReport {
            kind,
            count: member_indices.len(),
            n,
            member_indices,
            tolerance,
            reasons,
            degenerate_indices: Vec::new(),
            assumption_suspect: false,
            note: None,
        }
    }
}

fn tol_at(tol: f64, rhs: f64) -> f64 {
    tol * (1.0 + rhs.abs())
}

fn moved(a: &Decision, b: &Decision) -> bool {
    let close = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .all(|(p, q)| (p - q).abs() <= SOL_TOL * (1.0 + p.abs().max(q.abs())))
    };
    !(close(&a.r, &b.r) && close(&a.b, &b.b) && close(&a.u, &b.u))
}

/// Leave-one-out support count: sample `i` is support iff dropping all of its rows
/// moves the optimizer `(r, b, u)`.
pub fn support_count_exact(program: &Program) -> Result<ComplexityReport> {
    let n = program.num_samples;
    let (full, report) = program.solve()?;
    let support = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut removed = vec![false; n];
            removed[i] = true;
            let (dec, _) = program.solve_without(&removed)?;
            Ok(moved(&full, &dec))
        })
        .collect::<Result<Vec<bool>>>()?;

    let mut binding = vec![false; n];
    for r in report.binding_rows(&program.lp, COMPLEXITY_TOL) {
        if let Some(i) = program.lp.rows[r].origin.sample() {
            binding[i] = true;
        }
    }
    let reasons = (0..n)
        .filter(|&i| support[i])
        .map(|index| Membership {
            index,
            reason: Reason::RemovedChangesSolution,
            step: None,
            point: None,
        })
        .collect();
    let mut out = ComplexityReport::from_members(ComplexityKind::ExactSupport, n, SOL_TOL, reasons);
    out.degenerate_indices = (0..n).filter(|&i| binding[i] && !support[i]).collect();

    // keeping only the support samples must reproduce the optimizer
    let removed: Vec<bool> = support.iter().map(|s| !s).collect();
    if removed.iter().any(|&r| r) {
        let (reduced, _) = program.solve_without(&removed)?;
        out.assumption_suspect = moved(&full, &reduced);
    }
    if !out.degenerate_indices.is_empty() {
        out.note = Some("binding samples without support status; optimizer may be degenerate".into());
    }
    Ok(out)
}

/// Qualifying step of `s` against `dec`: the first violated one, else the first tight one.
fn qualifies(
    dec: &Decision,
    s: &Scenario,
    q: &RequestSchedule,
    b0: f64,
    rule: ViolationRule,
    tol: f64,
) -> Option<(usize, bool)> {
    let mut first_tight = None;
    for t in 0..dec.k() {
        // (slack, rhs) pairs; slack < 0 is a violation
        let bal = match rule {
            ViolationRule::Sampled => (dec.u[t] - s.ell[t], s.ell[t]),
            ViolationRule::Balance => {
                let realized = dec.prev_b(t, b0) + q.q[t] + dec.r[t] - s.ell[t];
                (dec.b[t] - realized, realized)
            }
        };
        let cap = (s.beta[t] - dec.b[t], s.beta[t]);
        for (slack, rhs) in [bal, cap] {
            let band = tol_at(tol, rhs);
            if slack < -band {
                return Some((t, true));
            }
            if slack <= band && first_tight.is_none() {
                first_tight = Some((t, false));
            }
        }
    }
    first_tight
}

/// Samples whose rows are tight or violated at the relaxed optimum.
pub fn relaxed_complexity(
    dec: &Decision,
    set: &ScenarioSet,
    q: &RequestSchedule,
    cfg: &HorizonConfig,
    rule: ViolationRule,
    tol: f64,
) -> Result<ComplexityReport> {
    ensure_len("decision horizon", set.k(), dec.k())?;
    ensure_len("requests", dec.k(), q.q.len())?;
    let reasons = set
        .scenarios
        .iter()
        .enumerate()
        .filter_map(|(index, s)| {
            qualifies(dec, s, q, cfg.b0, rule, tol).map(|(t, violated)| Membership {
                index,
                reason: if violated { Reason::Violated } else { Reason::Active },
                step: Some(t + 1),
                point: None,
            })
        })
        .collect();
    Ok(ComplexityReport::from_members(ComplexityKind::Relaxed, set.len(), tol, reasons))
}

/// Samples with a cloud point whose rows are tight or violated at the adversarial optimum.
pub fn adversarial_complexity(
    dec: &Decision,
    cloud: &PerturbationCloud,
    q: &RequestSchedule,
    cfg: &HorizonConfig,
    tol: f64,
) -> Result<ComplexityReport> {
    ensure_len("decision horizon", cloud.base.k(), dec.k())?;
    let reasons = cloud
        .points
        .iter()
        .enumerate()
        .filter_map(|(index, pts)| {
            let hits: Vec<(usize, usize, bool)> = pts
                .iter()
                .enumerate()
                .filter_map(|(j, s)| {
                    qualifies(dec, s, q, cfg.b0, ViolationRule::Sampled, tol).map(|(t, v)| (j, t, v))
                })
                .collect();
            // a violated point outranks a merely tight one
            let pick = hits.iter().find(|h| h.2).or(hits.first())?;
            Some(Membership {
                index,
                reason: if pick.2 { Reason::HullViolated } else { Reason::HullActive },
                step: Some(pick.1 + 1),
                point: Some(pick.0),
            })
        })
        .collect();
    let mut out = ComplexityReport::from_members(ComplexityKind::Adversarial, cloud.base.len(), tol, reasons);
    out.note = Some(format!(
        "conditions evaluated at the {} cloud points of each sample",
        cloud.m()
    ));
    Ok(out)
}
