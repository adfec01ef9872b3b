//! Deterministic LP solving with lazily activated sampled rows and a lexicographic
//! tie-break that singles out one optimal vertex.
//!
//! Structural rows are always part of the working problem. Sampled rows (those
//! tagged with a sample or hull origin) are grouped by left-hand side; only the
//! tightest row of each group can bind, and groups enter the working problem only
//! once the current vertex violates them. The returned point satisfies every row.

mod program;
mod simplex;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use program::{LinearProgram, Row, RowOrigin, Sense};
use simplex::{solve_dense, DenseStatus};

pub const FEAS_TOL: f64 = 1e-8;
pub const OPT_TOL: f64 = 1e-8;
pub const TIE_TOL: f64 = 1e-7;

const MAX_PIVOTS: usize = 200_000;
const ROWS_PER_ROUND: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub row_activity: Vec<f64>,
    pub row_slack: Vec<f64>,
    pub iterations: usize,
    /// Row-generation rounds across all stages.
    pub rounds: usize,
    /// Sampled rows that were part of the final working problem.
    pub working_rows: usize,
    pub primal_residual: f64,
    /// Rows certifying infeasibility (phase-one artificials left positive).
    pub infeasible_rows: Vec<usize>,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Turns a non-optimal status into the matching error.
    pub fn require_optimal(self, lp: &LinearProgram) -> Result<SolveReport> {
        match self.status {
            SolveStatus::Optimal => Ok(self),
            SolveStatus::Infeasible => Err(Error::Infeasible {
                rows: self.infeasible_rows.iter().map(|&r| lp.rows[r].origin).collect(),
            }),
            SolveStatus::Unbounded => Err(Error::Unbounded),
        }
    }

    /// Rows whose slack is within `tol·(1 + |rhs|)` of zero or negative.
    pub fn binding_rows<'a>(&'a self, lp: &'a LinearProgram, tol: f64) -> impl Iterator<Item = usize> + 'a {
        self.row_slack
            .iter()
            .enumerate()
            .filter(move |(r, s)| **s <= tol * (1.0 + lp.rows[*r].rhs.abs()))
            .map(|(r, _)| r)
    }
}

/// Solves the program once, returning whichever optimal vertex the simplex reaches.
pub fn solve(lp: &LinearProgram) -> Result<SolveReport> {
    Working::new(lp, None)?.run()
}

/// Two-stage lexicographic solve.
///
/// Stage one minimizes the objective. Stage two minimizes the tie-break weights over
/// the optimal face: variables and rows with strictly positive reduced cost at the
/// stage-one vertex are held in place, and the objective is capped at
/// `J* + TIE_TOL·(1 + |J*|)`. The result depends only on row content, not on row order.
pub fn solve_unique(lp: &LinearProgram) -> Result<SolveReport> {
    solve_unique_masked(lp, None)
}

/// [`solve_unique`] with some rows removed; `dropped[r] == true` deletes row `r`.
pub fn solve_unique_masked(lp: &LinearProgram, dropped: Option<&[bool]>) -> Result<SolveReport> {
    let mut work = Working::new(lp, dropped)?;
    let first = work.run()?;
    if !first.is_optimal() {
        return Ok(first);
    }
    let j_star = first.objective;
    let cap = Row::new(
        lp.objective.iter().copied().enumerate().collect(),
        Sense::Le,
        j_star + TIE_TOL * (1.0 + j_star.abs()),
        RowOrigin::Structural,
    );
    work.extra = Some(cap);
    if let Some((pinned, tight)) = work.face.take() {
        work.pinned = pinned.into_iter().collect();
        work.tight = tight.into_iter().collect();
    }
    work.cost = lp
        .tie_break
        .clone()
        .unwrap_or_else(|| vec![1.0; lp.num_vars()]);
    let mut second = work.run()?;
    if !second.is_optimal() {
        return Err(Error::NumericalFailure(
            "tie-break stage lost feasibility or boundedness".into(),
        ));
    }
    second.objective = lp.objective_at(&second.x);
    second.iterations += first.iterations;
    second.rounds += first.rounds;
    Ok(second)
}

struct Working<'a> {
    lp: &'a LinearProgram,
    cost: Vec<f64>,
    structural: Vec<usize>,
    /// Tightest representative of each sampled left-hand-side group.
    groups: Vec<usize>,
    active: Vec<bool>,
    extra: Option<Row>,
    dropped: Option<&'a [bool]>,
    /// Optimal-face restriction applied in the tie-break stage.
    pinned: BTreeMap<usize, f64>,
    tight: BTreeSet<usize>,
    /// Face data of the last optimal run: pinned variables and tight rows.
    face: Option<(Vec<(usize, f64)>, Vec<usize>)>,
}

impl<'a> Working<'a> {
    fn new(lp: &'a LinearProgram, dropped: Option<&'a [bool]>) -> Result<Self> {
        lp.validate()?;
        if let Some(d) = dropped {
            crate::error::ensure_len("row mask", lp.rows.len(), d.len())?;
        }
        let keep = |r: usize| dropped.is_none_or(|d| !d[r]);
        let mut structural = Vec::new();
        let mut reps: BTreeMap<(Sense, Vec<(usize, u64)>), usize> = BTreeMap::new();
        let mut eq_sampled = Vec::new();
        for (r, row) in lp.rows.iter().enumerate() {
            if !keep(r) {
                continue;
            }
            if !row.origin.is_sampled() {
                structural.push(r);
                continue;
            }
            if row.sense == Sense::Eq {
                eq_sampled.push(r);
                continue;
            }
            reps.entry(row.pattern_key())
                .and_modify(|best| {
                    let cur = &lp.rows[*best];
                    let tighter = match row.sense {
                        Sense::Le => row.rhs < cur.rhs,
                        Sense::Ge => row.rhs > cur.rhs,
                        Sense::Eq => false,
                    };
                    if tighter {
                        *best = r;
                    }
                })
                .or_insert(r);
        }
        let mut groups: Vec<usize> = reps.into_values().collect();
        groups.extend(eq_sampled);
        groups.sort_by(|&a, &b| lp.rows[a].content_key().cmp(&lp.rows[b].content_key()));
        let active = vec![false; groups.len()];
        Ok(Working {
            lp,
            cost: lp.objective.clone(),
            structural,
            groups,
            active,
            extra: None,
            dropped,
            pinned: BTreeMap::new(),
            tight: BTreeSet::new(),
            face: None,
        })
    }

    fn run(&mut self) -> Result<SolveReport> {
        let lp = self.lp;
        let mut iterations = 0;
        let mut rounds = 0;
        let mut activated_all = false;
        let mut sorted_struct = self.structural.clone();
        sorted_struct.sort_by_key(|&r| lp.rows[r].content_key());
        loop {
            rounds += 1;
            // global row ids of the working problem, in solve order
            let mut ids: Vec<usize> = sorted_struct.clone();
            ids.extend(
                self.groups
                    .iter()
                    .zip(&self.active)
                    .filter(|(_, a)| **a)
                    .map(|(&r, _)| r),
            );
            let working_rows = ids.len() - sorted_struct.len();
            let tightened: Vec<Row> = ids
                .iter()
                .filter(|r| self.tight.contains(r))
                .map(|&r| Row {
                    sense: Sense::Eq,
                    ..lp.rows[r].clone()
                })
                .collect();
            let mut tight_iter = tightened.iter();
            let mut rows: Vec<&Row> = ids
                .iter()
                .map(|r| {
                    if self.tight.contains(r) {
                        tight_iter.next().expect("tightened row")
                    } else {
                        &lp.rows[*r]
                    }
                })
                .collect();
            if let Some(extra) = &self.extra {
                rows.push(extra);
            }

            let mut lower = lp.lower.clone();
            let mut upper = lp.upper.clone();
            for (&j, &v) in &self.pinned {
                lower[j] = v;
                upper[j] = v;
            }
            // columns untouched by any working row sit at their cheapest finite bound
            let mut touched = vec![false; lp.num_vars()];
            for row in &rows {
                for &(j, _) in &row.coeffs {
                    touched[j] = true;
                }
            }
            for j in 0..lp.num_vars() {
                if touched[j] {
                    continue;
                }
                let c = self.cost[j];
                let pin = if c > 0.0 || (c == 0.0 && lower[j].is_finite()) {
                    lower[j]
                } else {
                    upper[j]
                };
                if pin.is_finite() {
                    lower[j] = pin;
                    upper[j] = pin;
                }
            }

            let out = solve_dense(&self.cost, &lower, &upper, &rows, MAX_PIVOTS);
            iterations += out.iterations;
            match out.status {
                DenseStatus::Optimal => {}
                DenseStatus::Infeasible => {
                    // the working problem is a relaxation, so the full problem is infeasible too
                    let rows_out = out
                        .infeasible_rows
                        .iter()
                        .filter_map(|&l| ids.get(l).copied())
                        .collect();
                    return Ok(self.report(SolveStatus::Infeasible, out.x, iterations, rounds, working_rows, rows_out));
                }
                DenseStatus::Unbounded => {
                    if !activated_all && self.active.iter().any(|a| !a) {
                        self.active.iter_mut().for_each(|a| *a = true);
                        activated_all = true;
                        continue;
                    }
                    return Ok(self.report(SolveStatus::Unbounded, out.x, iterations, rounds, working_rows, Vec::new()));
                }
                DenseStatus::IterationLimit => {
                    return Err(Error::NumericalFailure(format!(
                        "simplex hit the pivot limit ({MAX_PIVOTS})"
                    )));
                }
            }

            let x = out.x;
            let mut violated: Vec<(f64, usize)> = self
                .groups
                .iter()
                .enumerate()
                .filter(|(g, _)| !self.active[*g])
                .filter_map(|(g, &r)| {
                    let row = &lp.rows[r];
                    let v = row.violation(&x);
                    (v > FEAS_TOL * (1.0 + row.rhs.abs())).then_some((v, g))
                })
                .collect();
            if violated.is_empty() {
                let report = self.report(SolveStatus::Optimal, x, iterations, rounds, working_rows, Vec::new());
                let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
                if report.primal_residual > FEAS_TOL * scale {
                    return Err(Error::NumericalFailure(format!(
                        "primal residual {:.3e} exceeds tolerance",
                        report.primal_residual
                    )));
                }
                self.face = Some((
                    out.pinned_vars.iter().map(|&j| (j, report.x[j])).collect(),
                    out.tight_rows
                        .iter()
                        .filter_map(|&l| ids.get(l).copied())
                        .collect(),
                ));
                return Ok(report);
            }
            // groups are content-sorted, so ties resolve by content
            violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(_, g) in violated.iter().take(ROWS_PER_ROUND) {
                self.active[g] = true;
            }
        }
    }

    fn report(
        &self,
        status: SolveStatus,
        x: Vec<f64>,
        iterations: usize,
        rounds: usize,
        working_rows: usize,
        infeasible_rows: Vec<usize>,
    ) -> SolveReport {
        let lp = self.lp;
        let row_activity: Vec<f64> = lp.rows.iter().map(|r| r.activity(&x)).collect();
        let row_slack: Vec<f64> = lp
            .rows
            .iter()
            .zip(&row_activity)
            .map(|(r, &a)| r.slack(a))
            .collect();
        let mut residual = 0.0f64;
        for (r, row) in lp.rows.iter().enumerate() {
            if self.dropped.is_some_and(|d| d[r]) {
                continue;
            }
            residual = residual.max(row.violation(&x));
        }
        for j in 0..lp.num_vars() {
            residual = residual.max(lp.lower[j] - x[j]).max(x[j] - lp.upper[j]);
        }
        SolveReport {
            status,
            objective: lp.objective_at(&x),
            x,
            row_activity,
            row_slack,
            iterations,
            rounds,
            working_rows,
            primal_residual: residual,
            infeasible_rows,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_var(rows: &[(Sense, f64)]) -> LinearProgram {
        let mut lp = LinearProgram::new(1);
        lp.lower[0] = f64::NEG_INFINITY;
        lp.objective[0] = 1.0;
        for &(s, rhs) in rows {
            lp.add_row(vec![(0, 1.0)], s, rhs, RowOrigin::Structural);
        }
        lp
    }

    #[test]
    fn min_x_subject_to_lower_bound() {
        let rep = solve(&one_var(&[(Sense::Ge, 3.0)])).unwrap();
        assert!(rep.is_optimal());
        assert!((rep.x[0] - 3.0).abs() < 1e-12);
        assert!((rep.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let lp = one_var(&[(Sense::Ge, 1.0), (Sense::Le, 0.0)]);
        let rep = solve(&lp).unwrap();
        assert_eq!(rep.status, SolveStatus::Infeasible);
        assert!(!rep.infeasible_rows.is_empty());
        assert!(matches!(rep.require_optimal(&lp), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn lazy_rows_are_all_satisfied() {
        // min -x0 - x1 with many sampled caps, only the smallest per column binds
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -1.0];
        for i in 0..500 {
            let cap = 1.0 + (i as f64 * 0.37).sin().abs() * 5.0;
            lp.add_row(vec![(0, 1.0)], Sense::Le, cap, RowOrigin::Sample(i));
            lp.add_row(vec![(1, 1.0)], Sense::Le, cap + 1.0, RowOrigin::Sample(i));
        }
        let rep = solve(&lp).unwrap();
        let min_cap = lp.rows.iter().step_by(2).map(|r| r.rhs).fold(f64::INFINITY, f64::min);
        assert!((rep.x[0] - min_cap).abs() < 1e-12);
        assert!((rep.x[1] - min_cap - 1.0).abs() < 1e-12);
        assert!(rep.row_slack.iter().all(|&s| s >= -1e-12));
        assert!(rep.working_rows <= 2);
    }

    #[test]
    fn unbounded_only_when_every_row_allows_it() {
        let mut lp = LinearProgram::new(1);
        lp.objective[0] = -1.0;
        lp.add_row(vec![(0, 1.0)], Sense::Le, 4.0, RowOrigin::Sample(0));
        let rep = solve(&lp).unwrap();
        assert!(rep.is_optimal());
        assert!((rep.x[0] - 4.0).abs() < 1e-12);

        let mut free = LinearProgram::new(1);
        free.objective[0] = -1.0;
        free.add_row(vec![(0, 1.0)], Sense::Ge, 0.0, RowOrigin::Sample(0));
        assert_eq!(solve(&free).unwrap().status, SolveStatus::Unbounded);
    }

    #[test]
    fn tie_break_picks_smallest_representative() {
        // min x0 - x1 over x0 - x1 >= -2 has a ray of optima; the tie-break picks x = (0, 2)
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, -1.0];
        lp.upper = vec![10.0, 10.0];
        lp.add_row(vec![(0, 1.0), (1, -1.0)], Sense::Ge, -2.0, RowOrigin::Structural);
        let rep = solve_unique(&lp).unwrap();
        assert!((rep.x[0]).abs() < 1e-9);
        assert!((rep.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn row_order_does_not_change_the_vertex() {
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![1.0, 1.0, 0.0];
        lp.upper = vec![5.0; 3];
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Ge, 2.0, RowOrigin::Structural);
        lp.add_row(vec![(0, 1.0), (2, 1.0)], Sense::Ge, 1.0, RowOrigin::Sample(0));
        lp.add_row(vec![(1, 1.0), (2, -1.0)], Sense::Ge, 0.5, RowOrigin::Sample(1));
        let a = solve_unique(&lp).unwrap();
        let mut rev = lp.clone();
        rev.rows.reverse();
        let b = solve_unique(&rev).unwrap();
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn masked_rows_are_ignored() {
        let mut lp = LinearProgram::new(1);
        lp.objective[0] = 1.0;
        lp.add_row(vec![(0, 1.0)], Sense::Ge, 2.0, RowOrigin::Sample(0));
        lp.add_row(vec![(0, 1.0)], Sense::Ge, 1.0, RowOrigin::Sample(1));
        let full = solve_unique(&lp).unwrap();
        assert!((full.x[0] - 2.0).abs() < 1e-12);
        let masked = solve_unique_masked(&lp, Some(&[true, false])).unwrap();
        assert!((masked.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lp_text_dump_mentions_every_row() {
        let lp = one_var(&[(Sense::Ge, 3.0), (Sense::Le, 7.5)]);
        let text = lp.to_lp_format();
        assert!(text.starts_with("\\ generated"));
        assert!(text.contains("c0: + 1.0 x0 >= 3.0"));
        assert!(text.contains("c1: + 1.0 x0 <= 7.5"));
        assert!(text.contains("x0 free"));
    }
}
