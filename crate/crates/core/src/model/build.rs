use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::types::{
    BalanceMode, BoxSupport, Decision, HorizonConfig, ObjectiveMode, PerturbationCloud, PriceSchedule,
    ProgramKind, RequestSchedule, Scenario, ScenarioSet,
};
use crate::error::{ensure, Result};
use crate::lp::{self, LinearProgram, RowOrigin, Sense, SolveReport};

/// Column layout `[r⁺ | r⁻ | b | u | ξ]` shared by every program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub k: usize,
    /// `xi_col[i]` is the column of sample `i`'s relaxation.
    xi_col: Vec<usize>,
}

impl Layout {
    fn new(k: usize, xi_col: Vec<usize>) -> Self {
        Layout { k, xi_col }
    }

    pub fn rp(&self, t: usize) -> usize {
        t
    }
    pub fn rm(&self, t: usize) -> usize {
        self.k + t
    }
    pub fn b(&self, t: usize) -> usize {
        2 * self.k + t
    }
    pub fn u(&self, t: usize) -> usize {
        3 * self.k + t
    }
    pub fn xi(&self, i: usize) -> usize {
        self.xi_col[i]
    }
    pub fn num_xi(&self) -> usize {
        self.xi_col.len()
    }
    pub fn num_vars(&self) -> usize {
        4 * self.k + self.xi_col.len()
    }
}

/// A built program together with what is needed to decode its solution.
#[derive(Debug, Clone)]
pub struct Program {
    pub kind: ProgramKind,
    pub lp: LinearProgram,
    pub layout: Layout,
    pub prices: PriceSchedule,
    pub objective_mode: ObjectiveMode,
    pub rho: Option<f64>,
    pub num_samples: usize,
}

impl Program {
    /// Solves under the tie-break and decodes the unique optimizer.
    pub fn solve(&self) -> Result<(Decision, SolveReport)> {
        let report = lp::solve_unique(&self.lp)?.require_optimal(&self.lp)?;
        Ok((self.decode(&report.x), report))
    }

    /// Solves with every row of the flagged samples removed.
    pub fn solve_without(&self, removed: &[bool]) -> Result<(Decision, SolveReport)> {
        let mask = self.row_mask(removed);
        let report = lp::solve_unique_masked(&self.lp, Some(&mask))?.require_optimal(&self.lp)?;
        Ok((self.decode(&report.x), report))
    }

    pub fn row_mask(&self, removed: &[bool]) -> Vec<bool> {
        self.lp
            .rows
            .iter()
            .map(|row| row.origin.sample().is_some_and(|i| removed.get(i).copied().unwrap_or(false)))
            .collect()
    }

    pub fn decode(&self, x: &[f64]) -> Decision {
        let l = &self.layout;
        let k = l.k;
        let r: Vec<f64> = (0..k).map(|t| x[l.rp(t)] - x[l.rm(t)]).collect();
        let xi: Vec<f64> = (0..l.num_xi()).map(|i| x[l.xi(i)]).collect();
        let penalty = self.rho.map_or(0.0, |rho| rho * xi.iter().sum::<f64>());
        Decision {
            program: self.kind,
            objective: objective_value(&self.prices, &r, self.objective_mode),
            b: (0..k).map(|t| x[l.b(t)]).collect(),
            u: (0..k).map(|t| x[l.u(t)]).collect(),
            r,
            xi,
            penalty,
            rho: self.rho,
        }
    }
}

/// Retailer cost of the exchange schedule `r`.
pub fn objective_value(prices: &PriceSchedule, r: &[f64], mode: ObjectiveMode) -> f64 {
    r.iter()
        .enumerate()
        .map(|(t, &v)| {
            let (buy, sell) = (v.max(0.0), (-v).max(0.0));
            match mode {
                ObjectiveMode::Arbitrage => prices.pi_plus[t] * buy - prices.pi_minus[t] * sell,
                ObjectiveMode::Printed => prices.pi_plus[t] * (buy + sell),
            }
        })
        .sum()
}

/// Deterministic schedule for a single known trajectory, with exact dynamics.
pub fn build_plm_base(
    cfg: &HorizonConfig,
    prices: &PriceSchedule,
    q: &RequestSchedule,
    scen: &Scenario,
) -> Result<Program> {
    check_common(cfg, prices, q)?;
    scen.validate(cfg.k)?;
    let mut p = skeleton(ProgramKind::Base, cfg, prices, 0, None, Vec::new());
    for t in 0..cfg.k {
        fix(&mut p.lp, p.layout.u(t), scen.ell[t]);
    }
    add_balance(&mut p, cfg, q, BalanceMode::Equality);
    for t in 0..cfg.k {
        add_cap(&mut p.lp, &p.layout, t, scen.beta[t], RowOrigin::Structural);
    }
    Ok(p)
}

/// Robust counterpart over a box support.
pub fn build_plm_robust(
    cfg: &HorizonConfig,
    prices: &PriceSchedule,
    q: &RequestSchedule,
    support: &BoxSupport,
) -> Result<Program> {
    check_common(cfg, prices, q)?;
    support.validate(cfg.k)?;
    let mut p = skeleton(ProgramKind::Robust, cfg, prices, 0, None, Vec::new());
    for t in 0..cfg.k {
        fix(&mut p.lp, p.layout.u(t), support.ell_max[t]);
    }
    add_balance(&mut p, cfg, q, cfg.balance_mode);
    for t in 0..cfg.k {
        add_cap(&mut p.lp, &p.layout, t, support.beta_min[t], RowOrigin::Structural);
    }
    Ok(p)
}

/// Scenario program with the per-step maximum sampled loss substituted for `u`.
pub fn build_plm_max_loss(
    cfg: &HorizonConfig,
    prices: &PriceSchedule,
    q: &RequestSchedule,
    set: &ScenarioSet,
) -> Result<Program> {
    check_common(cfg, prices, q)?;
    check_set(cfg, set)?;
    let mut p = skeleton(ProgramKind::ScenarioMaxLoss, cfg, prices, 0, None, Vec::new());
    let env = set.envelope();
    for t in 0..cfg.k {
        fix(&mut p.lp, p.layout.u(t), env.ell_max[t]);
    }
    add_balance(&mut p, cfg, q, cfg.balance_mode);
    for (i, s) in set.scenarios.iter().enumerate() {
        for t in 0..cfg.k {
            add_cap(&mut p.lp, &p.layout, t, s.beta[t], RowOrigin::Sample(i));
        }
    }
    p.num_samples = set.len();
    Ok(p)
}

/// Scenario program with worst-loss auxiliaries `u_k ≥ ℓ⁽ⁱ⁾_k`.
pub fn build_plm_scenario(
    cfg: &HorizonConfig,
    prices: &PriceSchedule,
    q: &RequestSchedule,
    set: &ScenarioSet,
) -> Result<Program> {
    check_common(cfg, prices, q)?;
    check_set(cfg, set)?;
    let mut p = skeleton(ProgramKind::Scenario, cfg, prices, 0, None, Vec::new());
    add_balance(&mut p, cfg, q, cfg.balance_mode);
    for (i, s) in set.scenarios.iter().enumerate() {
        for t in 0..cfg.k {
            add_loss(&mut p.lp, &p.layout, t, s.ell[t], RowOrigin::Sample(i));
            add_cap(&mut p.lp, &p.layout, t, s.beta[t], RowOrigin::Sample(i));
        }
    }
    p.num_samples = set.len();
    Ok(p)
}

/// Penalty-relaxed scenario program with per-sample relaxations `ξ_i ≥ 0`.
pub fn build_plm_relaxed(
    cfg: &HorizonConfig,
    prices: &PriceSchedule,
    q: &RequestSchedule,
    set: &ScenarioSet,
    rho: f64,
) -> Result<Program> {
    check_common(cfg, prices, q)?;
    check_set(cfg, set)?;
    check_rho(rho)?;
    let order = canonical_order(&set.scenarios);
    let mut p = skeleton(ProgramKind::Relaxed, cfg, prices, set.len(), Some(rho), order);
    add_relaxed_balance(&mut p, cfg, q, set.len());
    for (i, s) in set.scenarios.iter().enumerate() {
        for t in 0..cfg.k {
            add_loss(&mut p.lp, &p.layout, t, s.ell[t], RowOrigin::Sample(i));
            add_relaxed_cap(&mut p.lp, &p.layout, t, i, s.beta[t], RowOrigin::Sample(i));
        }
    }
    Ok(p)
}

/// Penalty-relaxed program whose loss and cap rows range over every cloud point.
pub fn build_plm_adversarial(
    cfg: &HorizonConfig,
    prices: &PriceSchedule,
    q: &RequestSchedule,
    cloud: &PerturbationCloud,
    rho: f64,
) -> Result<Program> {
    check_common(cfg, prices, q)?;
    cloud.validate()?;
    check_set(cfg, &cloud.base)?;
    check_rho(rho)?;
    let n = cloud.base.len();
    let order = canonical_order_cloud(cloud);
    let mut p = skeleton(ProgramKind::Adversarial, cfg, prices, n, Some(rho), order);
    add_relaxed_balance(&mut p, cfg, q, n);
    for (i, pts) in cloud.points.iter().enumerate() {
        for (j, s) in pts.iter().enumerate() {
            let origin = RowOrigin::SampleHull { sample: i, point: j };
            for t in 0..cfg.k {
                add_loss(&mut p.lp, &p.layout, t, s.ell[t], origin);
                add_relaxed_cap(&mut p.lp, &p.layout, t, i, s.beta[t], origin);
            }
        }
    }
    Ok(p)
}

fn check_common(cfg: &HorizonConfig, prices: &PriceSchedule, q: &RequestSchedule) -> Result<()> {
    cfg.validate()?;
    prices.validate(cfg.k)?;
    q.validate(cfg.k)
}

fn check_set(cfg: &HorizonConfig, set: &ScenarioSet) -> Result<()> {
    set.validate()?;
    crate::error::ensure_len("scenario horizon", cfg.k, set.k())
}

fn check_rho(rho: f64) -> Result<()> {
    ensure(rho >= 0.0 && rho.is_finite(), || format!("rho must be non-negative, got {rho}"))
}

fn skeleton(
    kind: ProgramKind,
    cfg: &HorizonConfig,
    prices: &PriceSchedule,
    n_xi: usize,
    rho: Option<f64>,
    order: Vec<usize>,
) -> Program {
    let k = cfg.k;
    // sample i's relaxation lives at the column of its canonical rank
    let mut xi_col = vec![0; n_xi];
    for (rank, &i) in order.iter().enumerate() {
        xi_col[i] = 4 * k + rank;
    }
    let layout = Layout::new(k, xi_col);
    let mut lp = LinearProgram::new(layout.num_vars());
    for t in 0..k {
        let (rp, rm) = (layout.rp(t), layout.rm(t));
        lp.upper[rp] = cfg.r_max;
        lp.upper[rm] = cfg.r_max;
        lp.objective[rp] = prices.pi_plus[t];
        lp.objective[rm] = match cfg.objective_mode {
            ObjectiveMode::Arbitrage => -prices.pi_minus[t],
            ObjectiveMode::Printed => prices.pi_plus[t],
        };
        lp.var_names[rp] = format!("rp{}", t + 1);
        lp.var_names[rm] = format!("rm{}", t + 1);
        lp.var_names[layout.b(t)] = format!("b{}", t + 1);
        lp.var_names[layout.u(t)] = format!("u{}", t + 1);
    }
    for i in 0..n_xi {
        let col = layout.xi(i);
        lp.objective[col] = rho.unwrap_or(0.0);
        lp.var_names[col] = format!("xi{i}");
    }
    // u outweighs any chain of b savings it could buy, so the tie-break keeps u minimal
    let mut weights = vec![1.0; layout.num_vars()];
    for t in 0..k {
        weights[layout.u(t)] = (k + 1) as f64;
    }
    lp.tie_break = Some(weights);
    Program {
        kind,
        lp,
        layout,
        prices: prices.clone(),
        objective_mode: cfg.objective_mode,
        rho,
        num_samples: n_xi,
    }
}

fn fix(lp: &mut LinearProgram, col: usize, value: f64) {
    lp.lower[col] = value;
    lp.upper[col] = value;
}

/// Balance terms `b_t − b_{t−1} − r⁺_t + r⁻_t + u_t` and the matching rhs `q_t (+ b0)`.
fn balance_terms(l: &Layout, cfg: &HorizonConfig, q: &RequestSchedule, t: usize) -> (Vec<(usize, f64)>, f64) {
    let mut coeffs = vec![(l.b(t), 1.0), (l.rp(t), -1.0), (l.rm(t), 1.0), (l.u(t), 1.0)];
    let mut rhs = q.q[t];
    if t == 0 {
        rhs += cfg.b0;
    } else {
        coeffs.push((l.b(t - 1), -1.0));
    }
    (coeffs, rhs)
}

fn add_balance(p: &mut Program, cfg: &HorizonConfig, q: &RequestSchedule, mode: BalanceMode) {
    let sense = match mode {
        BalanceMode::Envelope => Sense::Ge,
        BalanceMode::Equality => Sense::Eq,
    };
    for t in 0..cfg.k {
        let (coeffs, rhs) = balance_terms(&p.layout, cfg, q, t);
        p.lp.add_row(coeffs, sense, rhs, RowOrigin::Structural);
    }
}

/// `ξ_i + balance ≥ q` for every sample; equality mode keeps the reverse side hard.
fn add_relaxed_balance(p: &mut Program, cfg: &HorizonConfig, q: &RequestSchedule, n: usize) {
    for t in 0..cfg.k {
        let (coeffs, rhs) = balance_terms(&p.layout, cfg, q, t);
        if cfg.balance_mode == BalanceMode::Equality {
            p.lp.add_row(coeffs.clone(), Sense::Le, rhs, RowOrigin::Structural);
        }
        for i in 0..n {
            let mut c = coeffs.clone();
            c.push((p.layout.xi(i), 1.0));
            p.lp.add_row(c, Sense::Ge, rhs, RowOrigin::Sample(i));
        }
    }
}

fn add_loss(lp: &mut LinearProgram, l: &Layout, t: usize, ell: f64, origin: RowOrigin) {
    lp.add_row(vec![(l.u(t), 1.0)], Sense::Ge, ell, origin);
}

fn add_cap(lp: &mut LinearProgram, l: &Layout, t: usize, beta: f64, origin: RowOrigin) {
    if beta.is_finite() {
        lp.add_row(vec![(l.b(t), 1.0)], Sense::Le, beta, origin);
    }
}

fn add_relaxed_cap(lp: &mut LinearProgram, l: &Layout, t: usize, i: usize, beta: f64, origin: RowOrigin) {
    lp.add_row(vec![(l.b(t), 1.0), (l.xi(i), -1.0)], Sense::Le, beta, origin);
}

fn cmp_scenario(a: &Scenario, b: &Scenario) -> Ordering {
    let key = |s: &Scenario| s.ell.iter().chain(&s.beta).copied().collect::<Vec<f64>>();
    let (ka, kb) = (key(a), key(b));
    ka.iter()
        .zip(&kb)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Sample indices sorted by content, so column placement ignores input order.
fn canonical_order(scen: &[Scenario]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scen.len()).collect();
    order.sort_by(|&a, &b| cmp_scenario(&scen[a], &scen[b]));
    order
}

fn canonical_order_cloud(cloud: &PerturbationCloud) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cloud.points.len()).collect();
    order.sort_by(|&a, &b| {
        cmp_scenario(&cloud.base.scenarios[a], &cloud.base.scenarios[b]).then_with(|| {
            cloud.points[a]
                .iter()
                .zip(&cloud.points[b])
                .map(|(x, y)| cmp_scenario(x, y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    });
    order
}
