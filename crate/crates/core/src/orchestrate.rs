//! End-to-end procedures: the tuning loop, the profit/risk sweep, trajectory tables
//! and the distribution-shift experiment.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certificates::{AmbiguitySpec, CertificateMethod, CertificateReport};
use crate::complexity::{adversarial_complexity, ComplexityReport, COMPLEXITY_TOL};
use crate::datagen::{generate_scenarios, perturb_cloud, shift_family, GeneratorSpec, ShiftFamily};
use crate::error::{ensure, Error, Result};
use crate::evaluate::{empirical_violation, ood_metrics, violated_steps, CalibrationReport, OodReport, ViolationRule};
use crate::model::{
    build_plm_adversarial, Decision, HorizonConfig, PerturbationCloud, PriceSchedule, RequestSchedule, ScenarioSet,
};

/// Everything fixed across runs of one study: horizon, contract data, generator and violation rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub horizon: HorizonConfig,
    pub prices: PriceSchedule,
    pub requests: RequestSchedule,
    pub generator: GeneratorSpec,
    pub rule: ViolationRule,
}

impl Study {
    pub fn validate(&self) -> Result<()> {
        self.horizon.validate()?;
        self.prices.validate(self.horizon.k)?;
        self.requests.validate(self.horizon.k)?;
        self.generator.validate()?;
        crate::error::ensure_len("generator horizon", self.horizon.k, self.generator.k)
    }
}

/// Child seed for a named stream, so every random input flows from one master seed.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// One solve of the adversarial program with its certificate chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdversarialRun {
    pub n: usize,
    pub rho: f64,
    pub sigma: f64,
    pub decision: Decision,
    pub complexity: ComplexityReport,
    pub certificate: CertificateReport,
    pub dro: CertificateReport,
}

pub fn training_set(study: &Study, n: usize, master: u64) -> Result<ScenarioSet> {
    generate_scenarios(&study.generator, n, derive_seed(master, "train"))
}

pub fn training_cloud(set: &ScenarioSet, sigma: f64, m: usize, master: u64) -> Result<PerturbationCloud> {
    perturb_cloud(set, sigma, m, derive_seed(master, "cloud"))
}

pub fn run_adversarial(
    study: &Study,
    cloud: &PerturbationCloud,
    rho: f64,
    delta: f64,
    amb: &AmbiguitySpec,
) -> Result<AdversarialRun> {
    let prog = build_plm_adversarial(&study.horizon, &study.prices, &study.requests, cloud, rho)?;
    let (decision, _) = prog.solve()?;
    let complexity = adversarial_complexity(&decision, cloud, &study.requests, &study.horizon, COMPLEXITY_TOL)?;
    let n = cloud.base.len();
    let certificate = CertificateReport::posteriori(CertificateMethod::Adversarial, n, complexity.count, delta)?;
    let dro = certificate.with_ambiguity(amb)?;
    Ok(AdversarialRun {
        n,
        rho,
        sigma: cloud.sigma,
        decision,
        complexity,
        certificate,
        dro,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub eps_goal: f64,
    pub n_initial: usize,
    pub n_plus: usize,
    pub rho_initial: f64,
    pub rho_plus: f64,
    pub delta: f64,
    pub amb: AmbiguitySpec,
    pub m: usize,
    pub sigma: f64,
    pub max_iterations: usize,
}

impl TuneConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.eps_goal > 0.0 && self.eps_goal <= 1.0, || {
            format!("eps_goal must lie in (0,1], got {}", self.eps_goal)
        })?;
        ensure(self.rho_plus >= 0.0 && self.rho_initial >= 0.0, || "rho values must be non-negative".into())?;
        ensure(self.n_plus > 0 || self.rho_plus > 0.0, || "N_plus and rho_plus cannot both be zero".into())?;
        ensure(self.n_initial >= 1 && self.m >= 1 && self.max_iterations >= 1, || {
            "initial N, M and max_iterations must be positive".into()
        })?;
        ensure(self.delta > 0.0 && self.delta < 1.0, || "delta must lie in (0,1)".into())?;
        self.amb.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub iteration: usize,
    pub n: usize,
    pub rho: f64,
    pub objective: f64,
    pub complexity: usize,
    pub eps_lower: f64,
    pub eps_upper: f64,
    /// Certified level including the ambiguity addend.
    pub eps: f64,
    pub vacuous: bool,
    pub certificate: CertificateReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub decision: Decision,
    pub eps: f64,
    pub attained: bool,
    pub trace: Vec<TuneRow>,
    pub last: AdversarialRun,
}

impl TuneOutcome {
    pub fn require_attained(&self, goal: f64) -> Result<()> {
        if self.attained {
            Ok(())
        } else {
            Err(Error::NotAttained {
                goal,
                best: self.trace.iter().map(|r| r.eps).fold(1.0, f64::min),
                iterations: self.trace.len(),
            })
        }
    }
}

/// Grows `N` and `ρ` until the distributionally robust level drops to `eps_goal`.
///
/// Training data grows by appending: the set at size `N` is a prefix of the set at
/// every larger size, so constraints only accumulate across iterations.
pub fn tune(cfg: &TuneConfig, study: &Study, master: u64) -> Result<TuneOutcome> {
    cfg.validate()?;
    study.validate()?;
    let (mut n, mut rho) = (cfg.n_initial, cfg.rho_initial);
    let mut eps = 1.0f64;
    let mut trace = Vec::new();
    let mut last = None;
    for iteration in 1..=cfg.max_iterations {
        let set = training_set(study, n, master)?;
        let cloud = training_cloud(&set, cfg.sigma, cfg.m, master)?;
        let run = run_adversarial(study, &cloud, rho, cfg.delta, &cfg.amb)?;
        eps = run.dro.eps_upper;
        trace.push(TuneRow {
            iteration,
            n,
            rho,
            objective: run.decision.objective,
            complexity: run.complexity.count,
            eps_lower: run.certificate.eps_lower,
            eps_upper: run.certificate.eps_upper,
            eps,
            vacuous: run.dro.vacuous,
            certificate: run.dro.clone(),
        });
        last = Some(run);
        if eps <= cfg.eps_goal {
            break;
        }
        n += cfg.n_plus;
        rho += cfg.rho_plus;
    }
    let last = last.expect("at least one iteration");
    Ok(TuneOutcome {
        decision: last.decision.clone(),
        attained: eps <= cfg.eps_goal,
        eps,
        trace,
        last,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub m: usize,
    pub rho: f64,
    pub delta: f64,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Adversarial deviation radius; the cloud uses `sigma = R`.
    pub r: f64,
    pub n: usize,
    pub rho: f64,
    pub objective: f64,
    pub profit: f64,
    /// Held-out violation under the nominal generator.
    pub violation: f64,
    pub violation_se: f64,
    /// Held-out violation where any of `M` perturbed copies of a test scenario may trigger.
    pub adv_violation: f64,
    pub eps_upper: f64,
    pub complexity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

/// Profit versus held-out violation over a grid of deviation radii and sample sizes.
pub fn tradeoff_sweep(
    r_values: &[f64],
    n_values: &[usize],
    cfg: &SweepConfig,
    study: &Study,
    master: u64,
) -> Result<SweepTable> {
    ensure(!r_values.is_empty() && !n_values.is_empty(), || "sweep grid is empty".into())?;
    ensure(r_values.iter().all(|r| *r >= 0.0 && r.is_finite()), || "R values must be non-negative".into())?;
    ensure(cfg.test_size >= 1, || "sweep test size must be positive".into())?;
    study.validate()?;
    let test = generate_scenarios(&study.generator, cfg.test_size, derive_seed(master, "sweep_test"))?;
    let cells: Vec<(usize, f64)> = n_values
        .iter()
        .flat_map(|&n| r_values.iter().map(move |&r| (n, r)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(n, r)| {
            let set = training_set(study, n, master)?;
            let cloud = training_cloud(&set, r, cfg.m, master)?;
            let prog = build_plm_adversarial(&study.horizon, &study.prices, &study.requests, &cloud, cfg.rho)?;
            let (dec, _) = prog.solve()?;
            let comp = adversarial_complexity(&dec, &cloud, &study.requests, &study.horizon, COMPLEXITY_TOL)?;
            let cert = CertificateReport::posteriori(CertificateMethod::Adversarial, n, comp.count, cfg.delta)?;
            let stats = empirical_violation(&dec, &test, &study.requests, &study.horizon, study.rule)?;
            let test_cloud = perturb_cloud(&test, r, cfg.m, derive_seed(master, "sweep_test_cloud"))?;
            let adv_hits = test_cloud
                .points
                .iter()
                .zip(&test.scenarios)
                .filter(|(pts, nominal)| {
                    pts.iter().chain(std::iter::once(*nominal)).any(|s| {
                        violated_steps(&dec, s, &study.requests, study.horizon.b0, study.rule)
                            .next()
                            .is_some()
                    })
                })
                .count();
            let p = stats.rate;
            Ok(SweepRow {
                r,
                n,
                rho: cfg.rho,
                objective: dec.objective,
                profit: -dec.objective,
                violation: p,
                violation_se: (p * (1.0 - p) / stats.test_size as f64).sqrt(),
                adv_violation: adv_hits as f64 / test.len() as f64,
                eps_upper: cert.eps_upper,
                complexity: comp.count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub k: usize,
    pub b: f64,
    pub r: f64,
    pub u: f64,
}

pub fn trajectory_report(dec: &Decision) -> Vec<TrajectoryRow> {
    (0..dec.k())
        .map(|t| TrajectoryRow {
            k: t + 1,
            b: dec.b[t],
            r: dec.r[t],
            u: dec.u[t],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OodConfig {
    pub n_prime: usize,
    pub amb: AmbiguitySpec,
    pub test_size: usize,
    pub w2_pairs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OodOutcome {
    pub report: OodReport,
    pub family: ShiftFamily,
    pub eps_upper: f64,
    pub dro_addend: f64,
}

/// Builds a shift family inside the ambiguity ball and measures `dec` under every member.
pub fn ood_experiment(
    dec: &Decision,
    eps_upper: f64,
    cfg: &OodConfig,
    study: &Study,
    master: u64,
) -> Result<OodOutcome> {
    study.validate()?;
    let dro = crate::certificates::dro_bound(eps_upper, &cfg.amb)?;
    let family = shift_family(
        &study.generator,
        cfg.n_prime,
        cfg.amb.mu,
        cfg.w2_pairs,
        derive_seed(master, "family"),
    )?;
    let report = ood_metrics(
        dec,
        &family,
        &study.requests,
        &study.horizon,
        study.rule,
        cfg.test_size,
        dro.bound,
        derive_seed(master, "ood_test"),
    )?;
    Ok(OodOutcome {
        report,
        family,
        eps_upper,
        dro_addend: dro.addend,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new<C: Serialize>(config: &C, seed: u64) -> Result<Self> {
        let bytes = serde_json::to_vec(config)?;
        let digest = Sha256::digest(&bytes);
        Ok(Provenance {
            tool: "vess".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
        })
    }
}

pub fn write_tradeoff_csv<W: Write>(table: &SweepTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "R", "N", "profit", "violation", "violation_se", "adv_violation", "objective", "rho", "eps_upper",
        "complexity",
    ])?;
    for r in &table.rows {
        w.write_record([
            r.r.to_string(),
            r.n.to_string(),
            r.profit.to_string(),
            r.violation.to_string(),
            r.violation_se.to_string(),
            r.adv_violation.to_string(),
            r.objective.to_string(),
            r.rho.to_string(),
            r.eps_upper.to_string(),
            r.complexity.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["k", "b", "r", "u"])?;
    }
    w.flush()?;
    Ok(())
}

/// `variant,rate` rows followed by a `bound` row.
pub fn write_ood_csv<W: Write>(report: &OodReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variant", "rate"])?;
    for (v, rate) in report.rates.iter().enumerate() {
        w.write_record([(v + 1).to_string(), rate.to_string()])?;
    }
    w.write_record(["bound".to_string(), report.bound.to_string()])?;
    w.flush()?;
    Ok(())
}

pub fn write_tune_trace_csv<W: Write>(trace: &[TuneRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration", "N", "rho", "objective", "complexity", "eps_lower", "eps_upper", "eps", "vacuous",
    ])?;
    for r in trace {
        w.write_record([
            r.iteration.to_string(),
            r.n.to_string(),
            r.rho.to_string(),
            r.objective.to_string(),
            r.complexity.to_string(),
            r.eps_lower.to_string(),
            r.eps_upper.to_string(),
            r.eps.to_string(),
            r.vacuous.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_calibration_csv<W: Write>(report: &CalibrationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &report.records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
