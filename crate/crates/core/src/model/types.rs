use serde::{Deserialize, Serialize};

use crate::error::{ensure, ensure_len, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    /// One-sided `b_k ≥ b_{k-1} + q_k + r_k − u_k`.
    #[default]
    Envelope,
    /// Adds the reverse inequality, recovering exact dynamics with `u` as the loss.
    Equality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// `Σ π⁺[r]₊ − π⁻[r]₋`: purchases cost the buy price, sales earn the sell price.
    #[default]
    Arbitrage,
    /// `Σ π⁺([r]₊ + [r]₋)`: both directions charged at the buy price.
    Printed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    pub k: usize,
    #[serde(default)]
    pub b0: f64,
    pub r_max: f64,
    #[serde(default)]
    pub balance_mode: BalanceMode,
    #[serde(default)]
    pub objective_mode: ObjectiveMode,
}

impl HorizonConfig {
    pub fn new(k: usize, r_max: f64) -> Self {
        HorizonConfig {
            k,
            b0: 0.0,
            r_max,
            balance_mode: BalanceMode::default(),
            objective_mode: ObjectiveMode::default(),
        }
    }

    pub fn with_balance(mut self, mode: BalanceMode) -> Self {
        self.balance_mode = mode;
        self
    }

    pub fn with_b0(mut self, b0: f64) -> Self {
        self.b0 = b0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.k >= 1, || "horizon needs at least one step".into())?;
        ensure(self.r_max > 0.0 && self.r_max.is_finite(), || {
            format!("r_max must be positive, got {}", self.r_max)
        })?;
        ensure(self.b0 >= 0.0 && self.b0.is_finite(), || {
            format!("b0 must be non-negative, got {}", self.b0)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceSchedule {
    pub pi_plus: Vec<f64>,
    pub pi_minus: Vec<f64>,
}

impl PriceSchedule {
    pub fn flat(k: usize, buy: f64, sell: f64) -> Self {
        PriceSchedule {
            pi_plus: vec![buy; k],
            pi_minus: vec![sell; k],
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        ensure_len("pi_plus", k, self.pi_plus.len())?;
        ensure_len("pi_minus", k, self.pi_minus.len())?;
        for (step, (&p, &m)) in self.pi_plus.iter().zip(&self.pi_minus).enumerate() {
            ensure(m >= 0.0 && p >= m && p.is_finite(), || {
                format!("step {}: need pi_plus ≥ pi_minus ≥ 0, got {p} and {m}", step + 1)
            })?;
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PriceSchedule {
            pi_plus: self.pi_plus.iter().map(|p| p * factor).collect(),
            pi_minus: self.pi_minus.iter().map(|p| p * factor).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestSchedule {
    /// Positive entries are injections by the prosumers.
    pub q: Vec<f64>,
}

impl RequestSchedule {
    pub fn zeros(k: usize) -> Self {
        RequestSchedule { q: vec![0.0; k] }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        ensure_len("requests", k, self.q.len())?;
        ensure(self.q.iter().all(|v| v.is_finite()), || "requests must be finite".into())
    }
}

/// One joint trajectory of per-step losses and capacity caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub ell: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Scenario {
    pub fn new(ell: Vec<f64>, beta: Vec<f64>) -> Self {
        Scenario { ell, beta }
    }

    pub fn k(&self) -> usize {
        self.ell.len()
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        ensure_len("scenario losses", k, self.ell.len())?;
        ensure_len("scenario capacities", k, self.beta.len())?;
        ensure(
            self.ell.iter().chain(&self.beta).all(|v| *v >= 0.0 && v.is_finite()),
            || "scenario entries must be finite and non-negative".into(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    /// Seed the set was drawn with, when it came from a generator.
    pub seed: Option<u64>,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>) -> Self {
        ScenarioSet {
            scenarios,
            seed: None,
        }
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn k(&self) -> usize {
        self.scenarios.first().map_or(0, Scenario::k)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(!self.scenarios.is_empty(), || "scenario set is empty".into())?;
        let k = self.k();
        ensure(k >= 1, || "scenarios have zero length".into())?;
        self.scenarios.iter().try_for_each(|s| s.validate(k))
    }

    /// Per-step maximum loss and minimum capacity over the set.
    pub fn envelope(&self) -> BoxSupport {
        let k = self.k();
        let mut ell_max = vec![0.0f64; k];
        let mut beta_min = vec![f64::INFINITY; k];
        for s in &self.scenarios {
            for t in 0..k {
                ell_max[t] = ell_max[t].max(s.ell[t]);
                beta_min[t] = beta_min[t].min(s.beta[t]);
            }
        }
        BoxSupport { ell_max, beta_min }
    }

    /// First `n` scenarios.
    pub fn prefix(&self, n: usize) -> ScenarioSet {
        ScenarioSet {
            scenarios: self.scenarios[..n.min(self.len())].to_vec(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSupport {
    pub ell_max: Vec<f64>,
    pub beta_min: Vec<f64>,
}

impl BoxSupport {
    pub fn validate(&self, k: usize) -> Result<()> {
        ensure_len("ell_max", k, self.ell_max.len())?;
        ensure_len("beta_min", k, self.beta_min.len())?;
        ensure(
            self.ell_max.iter().chain(&self.beta_min).all(|v| *v >= 0.0 && !v.is_nan()),
            || "support bounds must be non-negative".into(),
        )
    }
}

/// Which optimization program produced a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramKind {
    /// Deterministic schedule for one known trajectory.
    Base,
    /// Robust counterpart over a box support.
    Robust,
    /// Scenario program with the per-step maximum loss substituted directly.
    ScenarioMaxLoss,
    /// Scenario program with worst-loss auxiliaries `u`.
    Scenario,
    /// Penalty-relaxed scenario program.
    Relaxed,
    /// Penalty-relaxed program over perturbation clouds.
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub program: ProgramKind,
    pub r: Vec<f64>,
    pub b: Vec<f64>,
    pub u: Vec<f64>,
    /// Per-sample relaxations, in the caller's sample order; empty when not relaxed.
    pub xi: Vec<f64>,
    /// Retailer cost `J(r)` in money units.
    pub objective: f64,
    /// `ρ·Σ ξ`, zero for unrelaxed programs.
    pub penalty: f64,
    pub rho: Option<f64>,
}

impl Decision {
    pub fn k(&self) -> usize {
        self.r.len()
    }

    /// Plan consistent with `b0` for the SoC before step 1.
    pub fn prev_b(&self, step: usize, b0: f64) -> f64 {
        if step == 0 {
            b0
        } else {
            self.b[step - 1]
        }
    }

    pub fn check_invariants(&self, r_max: f64, tol: f64) -> Result<()> {
        ensure(self.r.iter().all(|r| r.abs() <= r_max + tol), || {
            "retailer exchange exceeds r_max".into()
        })?;
        ensure(self.b.iter().all(|b| *b >= -tol), || "negative state of charge".into())?;
        ensure(self.xi.iter().all(|x| *x >= -tol), || "negative relaxation".into())
    }
}

/// Perturbed copies of each training scenario approximating its adversarial region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCloud {
    pub base: ScenarioSet,
    /// `points[i][j]` is the `j`-th perturbed copy of sample `i`.
    pub points: Vec<Vec<Scenario>>,
    pub sigma: f64,
    pub seed: u64,
}

impl PerturbationCloud {
    pub fn m(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        ensure_len("cloud samples", self.base.len(), self.points.len())?;
        let m = self.m();
        ensure(m >= 1, || "cloud needs at least one point per sample".into())?;
        let k = self.base.k();
        for pts in &self.points {
            ensure_len("cloud points per sample", m, pts.len())?;
            pts.iter().try_for_each(|s| s.validate(k))?;
        }
        Ok(())
    }
}
