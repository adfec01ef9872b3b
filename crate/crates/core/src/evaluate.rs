//! Out-of-sample and out-of-distribution violation estimates, and Monte Carlo
//! calibration of the certificates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{apriori_epsilon, posteriori_bounds};
use crate::complexity::relaxed_complexity;
use crate::datagen::{generate_scenarios, uniform_scenarios, GeneratorSpec, ShiftFamily};
use crate::error::{ensure, ensure_len, Result};
use crate::model::{
    build_plm_relaxed, build_plm_scenario, Decision, HorizonConfig, PriceSchedule, RequestSchedule, Scenario,
    ScenarioSet,
};

/// Relative slack below which a boundary case is not reported as a violation.
pub const EVAL_TOL: f64 = 1e-9;

/// Which event counts as a violation of a decision by a realized scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationRule {
    /// The scenario breaks one of its own sampled rows: `ℓ_k > u*_k` or `b*_k > β_k`.
    #[default]
    Sampled,
    /// The realized balance undercuts the plan, `b*_k < b*_{k−1} + q_k + r*_k − ℓ_k`, or `b*_k > β_k`.
    Balance,
}

fn over(x: f64, limit: f64) -> bool {
    x > limit + EVAL_TOL * (1.0 + limit.abs())
}

/// Steps (0-based) at which `s` violates `dec`.
pub fn violated_steps<'a>(
    dec: &'a Decision,
    s: &'a Scenario,
    q: &'a RequestSchedule,
    b0: f64,
    rule: ViolationRule,
) -> impl Iterator<Item = usize> + 'a {
    (0..dec.k()).filter(move |&t| {
        let cap = over(dec.b[t], s.beta[t]);
        let bal = match rule {
            ViolationRule::Sampled => over(s.ell[t], dec.u[t]),
            ViolationRule::Balance => {
                let realized = dec.prev_b(t, b0) + q.q[t] + dec.r[t] - s.ell[t];
                over(realized, dec.b[t])
            }
        };
        cap || bal
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationStats {
    pub rate: f64,
    pub violated_count: usize,
    pub test_size: usize,
    /// Number of test scenarios violating at each step.
    pub per_step: Vec<usize>,
}

pub fn empirical_violation(
    dec: &Decision,
    test: &ScenarioSet,
    q: &RequestSchedule,
    cfg: &HorizonConfig,
    rule: ViolationRule,
) -> Result<ViolationStats> {
    ensure_len("test horizon", dec.k(), test.k())?;
    ensure_len("requests", dec.k(), q.q.len())?;
    ensure(!test.is_empty(), || "empty test set".into())?;
    let mut per_step = vec![0usize; dec.k()];
    let mut violated = 0;
    for s in &test.scenarios {
        let mut any = false;
        for t in violated_steps(dec, s, q, cfg.b0, rule) {
            per_step[t] += 1;
            any = true;
        }
        violated += usize::from(any);
    }
    Ok(ViolationStats {
        rate: violated as f64 / test.len() as f64,
        violated_count: violated,
        test_size: test.len(),
        per_step,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub rates: Vec<f64>,
    pub mean: f64,
    pub worst: f64,
    pub best: f64,
    pub bound: f64,
    /// Exactly `worst ≤ bound`.
    pub bounded: bool,
    pub test_size: usize,
    pub seed: u64,
}

/// Violation rate of `dec` under every variant of `family`, compared with `bound`.
pub fn ood_metrics(
    dec: &Decision,
    family: &ShiftFamily,
    q: &RequestSchedule,
    cfg: &HorizonConfig,
    rule: ViolationRule,
    test_size: usize,
    bound: f64,
    seed: u64,
) -> Result<OodReport> {
    ensure(!family.variants.is_empty(), || "shift family is empty".into())?;
    ensure(test_size >= 1, || "test size must be positive".into())?;
    let rates = family
        .variants
        .par_iter()
        .enumerate()
        .map(|(v, var)| {
            let test = generate_scenarios(&var.spec, test_size, seed ^ (v as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))?;
            Ok(empirical_violation(dec, &test, q, cfg, rule)?.rate)
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst = rates.iter().copied().fold(0.0, f64::max);
    let best = rates.iter().copied().fold(1.0, f64::min);
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    Ok(OodReport {
        mean,
        worst,
        best,
        bound,
        bounded: worst <= bound,
        rates,
        test_size,
        seed,
    })
}

/// Data model for calibration trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CalibrationData {
    Generator(GeneratorSpec),
    Uniform { ell: (f64, f64), beta: (f64, f64) },
}

impl CalibrationData {
    fn draw(&self, k: usize, n: usize, seed: u64) -> Result<ScenarioSet> {
        match self {
            CalibrationData::Generator(spec) => generate_scenarios(spec, n, seed),
            CalibrationData::Uniform { ell, beta } => uniform_scenarios(k, *ell, *beta, n, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub horizon: HorizonConfig,
    pub prices: PriceSchedule,
    pub requests: RequestSchedule,
    pub data: CalibrationData,
    /// Training size for the two-sided check.
    pub n: usize,
    pub rho: f64,
    pub delta: f64,
    /// Training size and confidence for the a-priori check on the unrelaxed program.
    pub apriori_n: usize,
    pub apriori_delta: f64,
    pub test_size: usize,
    #[serde(default)]
    pub rule: ViolationRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTrial {
    pub trial: usize,
    pub complexity: usize,
    pub eps_lower: f64,
    pub eps_upper: f64,
    pub violation: f64,
    pub outside: bool,
    pub apriori_eps: f64,
    pub apriori_violation: f64,
    pub apriori_exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub trials: usize,
    pub seed: u64,
    pub miscoverage: f64,
    pub miscoverage_limit: f64,
    pub apriori_exceedance: f64,
    pub apriori_limit: f64,
    pub posteriori_ok: bool,
    pub apriori_ok: bool,
    pub records: Vec<CalibrationTrial>,
}

fn binomial_slack(p: f64, t: usize) -> f64 {
    p + 3.0 * (p * (1.0 - p) / t as f64).sqrt()
}

/// `t` independent train/solve/certify/test runs; reports how often the true
/// violation escapes the certified interval and the a-priori level.
pub fn calibration_trial(cfg: &CalibrationConfig, t: usize, seed: u64) -> Result<CalibrationReport> {
    ensure(t >= 1, || "need at least one trial".into())?;
    let k = cfg.horizon.k;
    let eps_prior = apriori_epsilon(cfg.apriori_n, k, cfg.apriori_delta)?;
    let records = (0..t)
        .into_par_iter()
        .map(|trial| {
            let base = seed.wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let train = cfg.data.draw(k, cfg.n.max(cfg.apriori_n), base)?;
            let test = cfg.data.draw(k, cfg.test_size, base ^ 0xA5A5_A5A5_A5A5_A5A5)?;

            let relaxed_set = train.prefix(cfg.n);
            let prog = build_plm_relaxed(&cfg.horizon, &cfg.prices, &cfg.requests, &relaxed_set, cfg.rho)?;
            let (dec, _) = prog.solve()?;
            let comp = relaxed_complexity(&dec, &relaxed_set, &cfg.requests, &cfg.horizon, cfg.rule, crate::complexity::COMPLEXITY_TOL)?;
            let bounds = posteriori_bounds(cfg.n, comp.count, cfg.delta)?;
            let violation = empirical_violation(&dec, &test, &cfg.requests, &cfg.horizon, cfg.rule)?.rate;

            let prior_set = train.prefix(cfg.apriori_n);
            let prog = build_plm_scenario(&cfg.horizon, &cfg.prices, &cfg.requests, &prior_set)?;
            let (prior_dec, _) = prog.solve()?;
            let apriori_violation =
                empirical_violation(&prior_dec, &test, &cfg.requests, &cfg.horizon, cfg.rule)?.rate;

            Ok(CalibrationTrial {
                trial,
                complexity: comp.count,
                eps_lower: bounds.eps_lower,
                eps_upper: bounds.eps_upper,
                outside: violation < bounds.eps_lower || violation > bounds.eps_upper,
                violation,
                apriori_eps: eps_prior,
                apriori_exceeded: apriori_violation > eps_prior,
                apriori_violation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let frac = |f: fn(&CalibrationTrial) -> bool| records.iter().filter(|r| f(r)).count() as f64 / t as f64;
    let miscoverage = frac(|r| r.outside);
    let apriori_exceedance = frac(|r| r.apriori_exceeded);
    let miscoverage_limit = binomial_slack(cfg.delta, t);
    let apriori_limit = binomial_slack(cfg.apriori_delta, t);
    Ok(CalibrationReport {
        trials: t,
        seed,
        miscoverage,
        miscoverage_limit,
        apriori_exceedance,
        apriori_limit,
        posteriori_ok: miscoverage <= miscoverage_limit,
        apriori_ok: apriori_exceedance <= apriori_limit,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProgramKind;

    fn dec(r: Vec<f64>, b: Vec<f64>, u: Vec<f64>) -> Decision {
        Decision {
            program: ProgramKind::Scenario,
            r,
            b,
            u,
            xi: vec![],
            objective: 0.0,
            penalty: 0.0,
            rho: None,
        }
    }

    #[test]
    fn saturated_loss_bound_never_violates() {
        let d = dec(vec![0.0; 2], vec![0.0; 2], vec![1e9; 2]);
        let test = ScenarioSet::new(vec![Scenario::new(vec![3.0, 4.0], vec![0.0, 1.0]); 5]);
        let q = RequestSchedule::zeros(2);
        let cfg = HorizonConfig::new(2, 5.0);
        let s = empirical_violation(&d, &test, &q, &cfg, ViolationRule::Sampled).unwrap();
        assert_eq!(s.rate, 0.0);
    }

    #[test]
    fn rules_disagree_on_direction_of_loss() {
        // plan with b1 = b0 + r − u under exact dynamics, u = 1
        let d = dec(vec![1.0], vec![0.0], vec![1.0]);
        let q = RequestSchedule::zeros(1);
        let cfg = HorizonConfig::new(1, 5.0);
        let big = ScenarioSet::new(vec![Scenario::new(vec![2.0], vec![10.0])]);
        let small = ScenarioSet::new(vec![Scenario::new(vec![0.5], vec![10.0])]);
        let rate = |set: &ScenarioSet, rule| empirical_violation(&d, set, &q, &cfg, rule).unwrap().rate;
        assert_eq!(rate(&big, ViolationRule::Sampled), 1.0);
        assert_eq!(rate(&small, ViolationRule::Sampled), 0.0);
        assert_eq!(rate(&big, ViolationRule::Balance), 0.0);
        assert_eq!(rate(&small, ViolationRule::Balance), 1.0);
    }

    #[test]
    fn per_step_histogram_counts_each_step() {
        let d = dec(vec![0.0; 2], vec![5.0, 5.0], vec![1.0, 1.0]);
        let test = ScenarioSet::new(vec![
            Scenario::new(vec![2.0, 0.0], vec![10.0, 10.0]),
            Scenario::new(vec![0.0, 0.0], vec![10.0, 4.0]),
            Scenario::new(vec![0.0, 0.0], vec![10.0, 10.0]),
        ]);
        let s = empirical_violation(&d, &test, &RequestSchedule::zeros(2), &HorizonConfig::new(2, 5.0), ViolationRule::Sampled)
            .unwrap();
        assert_eq!(s.violated_count, 2);
        assert_eq!(s.per_step, vec![1, 1]);
    }
}
