//! Dense bounded-variable primal simplex (two phases, tableau form).
//!
//! Every variable is mapped to one or two internal columns `y ∈ [0, ub]`; rows become
//! equalities with a slack and, where the slack cannot start basic, an artificial.
//! The final basis is re-solved with an LU factorization so the returned vertex does
//! not carry the tableau's accumulated rounding.

use nalgebra::{DMatrix, DVector};

use super::program::{Row, Sense};

const PIVOT_TOL: f64 = 1e-9;
const PRICE_TOL: f64 = 1e-9;
const DEGENERATE_SWITCH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DenseStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct DenseOutcome {
    pub status: DenseStatus,
    /// Values of the original variables.
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Local indices of rows whose artificial stayed positive after phase one.
    pub infeasible_rows: Vec<usize>,
    /// At an optimum: variables held at a bound by a strictly positive reduced cost.
    pub pinned_vars: Vec<usize>,
    /// At an optimum: local rows whose slack has a strictly positive reduced cost.
    pub tight_rows: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Column {
    var: usize,
    sign: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic(usize),
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// Row-major `m × ncols` entries of `B⁻¹A`.
    t: Vec<f64>,
    /// Reduced costs of the active phase.
    d: Vec<f64>,
    ub: Vec<f64>,
    kind: Vec<Kind>,
    state: Vec<State>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ncols + j]
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::AtUpper => self.ub[j],
            _ => 0.0,
        }
    }

    fn price(&mut self, cost: &[f64]) {
        let mut d = cost.to_vec();
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb != 0.0 {
                let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
                for (dj, &a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for &bj in &self.basis {
            d[bj] = 0.0;
        }
        self.d = d;
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.ncols;
        let p = self.at(r, q);
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[q] = 1.0;
        }
        let pivot_row: Vec<f64> = self.t[r * n..(r + 1) * n].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + q];
            if f != 0.0 {
                let row = &mut self.t[i * n..(i + 1) * n];
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (v, &pv) in self.d.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.d[q] = 0.0;
        }
        // caller sets the leaving variable's bound state
        self.basis[r] = q;
        self.state[q] = State::Basic(r);
    }

    /// Runs primal simplex iterations on the current reduced costs.
    fn optimize(&mut self) -> DenseStatus {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return DenseStatus::IterationLimit;
            }
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.ncols {
                if self.kind[j] == Kind::Artificial && self.ub[j] == 0.0 {
                    continue;
                }
                let dir = match self.state[j] {
                    State::Basic(_) => continue,
                    State::AtLower if self.d[j] < -PRICE_TOL && self.ub[j] > 0.0 => 1.0,
                    State::AtUpper if self.d[j] > PRICE_TOL => -1.0,
                    _ => continue,
                };
                let score = self.d[j].abs();
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if score > best {
                    best = score;
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else {
                return DenseStatus::Optimal;
            };

            // ratio test
            let mut theta = self.ub[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_mag = 0.0;
            for i in 0..self.m {
                let alpha = self.at(i, q) * dir;
                let bj = self.basis[i];
                let (limit, to_upper) = if alpha > PIVOT_TOL {
                    (self.xb[i].max(0.0) / alpha, false)
                } else if alpha < -PIVOT_TOL && self.ub[bj].is_finite() {
                    ((self.ub[bj] - self.xb[i]).max(0.0) / -alpha, true)
                } else {
                    continue;
                };
                let better = match leave {
                    None => limit < theta,
                    Some((li, _)) => {
                        if limit < theta - 1e-12 {
                            true
                        } else if limit <= theta + 1e-12 {
                            if bland {
                                bj < self.basis[li]
                            } else {
                                alpha.abs() > leave_mag
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = limit;
                    leave = Some((i, to_upper));
                    leave_mag = alpha.abs();
                }
            }
            if theta.is_infinite() {
                return DenseStatus::Unbounded;
            }
            self.iterations += 1;
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            let step = theta * dir;
            for i in 0..self.m {
                let a = self.at(i, q);
                if a != 0.0 {
                    self.xb[i] -= step * a;
                }
            }
            let entering_value = self.nonbasic_value(q) + step;
            match leave {
                None => {
                    // bound flip
                    self.state[q] = if dir > 0.0 {
                        State::AtUpper
                    } else {
                        State::AtLower
                    };
                }
                Some((r, to_upper)) => {
                    let leaving = self.basis[r];
                    self.pivot(r, q);
                    self.xb[r] = entering_value;
                    self.state[leaving] = if to_upper {
                        State::AtUpper
                    } else {
                        State::AtLower
                    };
                }
            }
        }
    }
}

/// Solves `min c·x` subject to `rows` and `lower ≤ x ≤ upper`.
///
/// `lower` must be finite or `-inf`; `upper` finite or `+inf`.
pub(crate) fn solve_dense(
    cost: &[f64],
    lower: &[f64],
    upper: &[f64],
    rows: &[&Row],
    max_iterations: usize,
) -> DenseOutcome {
    let n = cost.len();

    // variable transform: x_j = offset_j + Σ sign·y_col
    let mut columns: Vec<Column> = Vec::new();
    let mut col_ub: Vec<f64> = Vec::new();
    let mut offset = vec![0.0; n];
    let mut var_cols: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        let (l, u) = (lower[j], upper[j]);
        if l.is_finite() {
            offset[j] = l;
            var_cols[j].push(columns.len());
            columns.push(Column { var: j, sign: 1.0 });
            col_ub.push(u - l);
        } else if u.is_finite() {
            offset[j] = u;
            var_cols[j].push(columns.len());
            columns.push(Column { var: j, sign: -1.0 });
            col_ub.push(f64::INFINITY);
        } else {
            for sign in [1.0, -1.0] {
                var_cols[j].push(columns.len());
                columns.push(Column { var: j, sign });
                col_ub.push(f64::INFINITY);
            }
        }
    }
    let nstruct = columns.len();
    let m = rows.len();

    // dense standard-form matrix (before artificials) and rhs
    let mut a_std: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut slack_coef = Vec::with_capacity(m);
    for row in rows {
        let mut b = row.rhs;
        let mut entries = Vec::with_capacity(row.coeffs.len() + 1);
        for &(j, a) in &row.coeffs {
            b -= a * offset[j];
            for &c in &var_cols[j] {
                entries.push((c, a * columns[c].sign));
            }
        }
        let s = match row.sense {
            Sense::Le => 1.0,
            Sense::Ge => -1.0,
            Sense::Eq => 0.0,
        };
        let flip = if b < 0.0 { -1.0 } else { 1.0 };
        for e in entries.iter_mut() {
            e.1 *= flip;
        }
        a_std.push(entries);
        rhs.push(b * flip);
        slack_coef.push(s * flip);
    }

    // column layout: structural | slacks (one per inequality) | artificials
    let mut kind = vec![Kind::Structural; nstruct];
    let mut ub = col_ub.clone();
    let mut slack_col = vec![usize::MAX; m];
    for i in 0..m {
        if slack_coef[i] != 0.0 {
            slack_col[i] = kind.len();
            kind.push(Kind::Slack);
            ub.push(f64::INFINITY);
        }
    }
    let mut basis = vec![usize::MAX; m];
    let mut art_col = vec![usize::MAX; m];
    for i in 0..m {
        if slack_coef[i] > 0.0 {
            basis[i] = slack_col[i];
        } else {
            art_col[i] = kind.len();
            basis[i] = kind.len();
            kind.push(Kind::Artificial);
            ub.push(f64::INFINITY);
        }
    }
    let ncols = kind.len();
    let mut t = vec![0.0; m * ncols];
    for i in 0..m {
        for &(c, a) in &a_std[i] {
            t[i * ncols + c] += a;
        }
        if slack_col[i] != usize::MAX {
            t[i * ncols + slack_col[i]] = slack_coef[i];
        }
        if art_col[i] != usize::MAX {
            t[i * ncols + art_col[i]] = 1.0;
        }
    }
    let mut state = vec![State::AtLower; ncols];
    for (i, &b) in basis.iter().enumerate() {
        state[b] = State::Basic(i);
    }
    let mut tab = Tableau {
        m,
        ncols,
        t,
        d: vec![0.0; ncols],
        ub,
        kind,
        state,
        basis,
        xb: rhs.clone(),
        iterations: 0,
        max_iterations,
    };

    // phase one
    let has_artificials = art_col.iter().any(|&c| c != usize::MAX);
    if has_artificials {
        let phase1: Vec<f64> = tab
            .kind
            .iter()
            .map(|k| if *k == Kind::Artificial { 1.0 } else { 0.0 })
            .collect();
        tab.price(&phase1);
        let status = tab.optimize();
        if status == DenseStatus::IterationLimit {
            return outcome(status, &tab, &columns, &offset, n, Vec::new());
        }
        let infeas: f64 = (0..m)
            .filter(|&i| tab.kind[tab.basis[i]] == Kind::Artificial)
            .map(|i| tab.xb[i].max(0.0))
            .sum();
        let scale = 1.0 + rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if infeas > 1e-9 * scale {
            let bad = (0..m)
                .filter(|&i| tab.kind[tab.basis[i]] == Kind::Artificial && tab.xb[i] > 1e-9 * scale)
                .collect();
            return outcome(DenseStatus::Infeasible, &tab, &columns, &offset, n, bad);
        }
        // drive artificials out of the basis
        for i in 0..m {
            if tab.kind[tab.basis[i]] != Kind::Artificial {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..ncols {
                if tab.kind[j] == Kind::Artificial || matches!(tab.state[j], State::Basic(_)) {
                    continue;
                }
                let a = tab.at(i, j).abs();
                if a > 1e-7 && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            if let Some((q, _)) = best {
                let value = tab.nonbasic_value(q);
                let leaving = tab.basis[i];
                // degenerate pivot: basic values of other rows shift by the artificial's residue
                let resid = tab.xb[i];
                let alpha: Vec<f64> = (0..m).map(|r| tab.at(r, q)).collect();
                let p = alpha[i];
                for r in 0..m {
                    if r != i {
                        tab.xb[r] -= alpha[r] / p * resid;
                    }
                }
                tab.pivot(i, q);
                tab.xb[i] = value + resid / p;
                tab.state[leaving] = State::AtLower;
            }
        }
        for j in 0..ncols {
            if tab.kind[j] == Kind::Artificial {
                tab.ub[j] = 0.0;
            }
        }
    }

    // phase two
    let mut phase2 = vec![0.0; ncols];
    for (c, col) in columns.iter().enumerate() {
        phase2[c] = cost[col.var] * col.sign;
    }
    tab.price(&phase2);
    let status = tab.optimize();
    if status != DenseStatus::Optimal {
        return outcome(status, &tab, &columns, &offset, n, Vec::new());
    }

    // refine basic values with a fresh factorization of the basis
    let mut full = DMatrix::<f64>::zeros(m, m);
    let mut b_vec = DVector::<f64>::from_vec(rhs.clone());
    for i in 0..m {
        for &(c, a) in &a_std[i] {
            if let State::Basic(k) = tab.state[c] {
                full[(i, k)] += a;
            } else {
                b_vec[i] -= a * tab.nonbasic_value(c);
            }
        }
        let extra = [(slack_col[i], slack_coef[i]), (art_col[i], 1.0)];
        for (c, a) in extra {
            if c == usize::MAX {
                continue;
            }
            if let State::Basic(k) = tab.state[c] {
                full[(i, k)] += a;
            } else {
                b_vec[i] -= a * tab.nonbasic_value(c);
            }
        }
    }
    if m > 0 {
        if let Some(sol) = full.lu().solve(&b_vec) {
            if sol.iter().all(|v| v.is_finite()) {
                for k in 0..m {
                    let c = tab.basis[k];
                    let ubc = tab.ub[c];
                    tab.xb[k] = sol[k].max(0.0).min(ubc);
                }
            }
        }
    }
    let mut out = outcome(DenseStatus::Optimal, &tab, &columns, &offset, n, Vec::new());
    let strictly_priced = |c: usize| match tab.state[c] {
        State::AtLower => tab.d[c] > PRICE_TOL,
        State::AtUpper => tab.d[c] < -PRICE_TOL,
        State::Basic(_) => false,
    };
    for j in 0..n {
        if var_cols[j].len() == 1 && strictly_priced(var_cols[j][0]) {
            out.pinned_vars.push(j);
        }
    }
    for i in 0..m {
        if slack_col[i] != usize::MAX && strictly_priced(slack_col[i]) {
            out.tight_rows.push(i);
        }
    }
    out
}

fn outcome(
    status: DenseStatus,
    tab: &Tableau,
    columns: &[Column],
    offset: &[f64],
    n: usize,
    infeasible_rows: Vec<usize>,
) -> DenseOutcome {
    let mut x = offset.to_vec();
    for (c, col) in columns.iter().enumerate() {
        let y = match tab.state[c] {
            State::Basic(i) => tab.xb[i],
            _ => tab.nonbasic_value(c),
        };
        x[col.var] += col.sign * y;
    }
    debug_assert_eq!(x.len(), n);
    DenseOutcome {
        status,
        x,
        iterations: tab.iterations,
        infeasible_rows,
        pinned_vars: Vec::new(),
        tight_rows: Vec::new(),
    }
}
