//! `vess`: generate scenarios, solve dispatch programs, certify decisions and run experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use vess_core::certificates::{CertificateMethod, CertificateReport};
use vess_core::complexity::{adversarial_complexity, relaxed_complexity, COMPLEXITY_TOL};
use vess_core::config::RunConfig;
use vess_core::evaluate::calibration_trial;
use vess_core::lp::SolveReport;
use vess_core::model::{
    build_plm_adversarial, build_plm_base, build_plm_relaxed, build_plm_robust, build_plm_scenario, load_scenarios,
    write_scenarios, Decision, Program, ScenarioSet,
};
use vess_core::orchestrate::{
    derive_seed, ood_experiment, run_adversarial, trajectory_report, training_cloud, training_set, tradeoff_sweep,
    tune, write_calibration_csv, write_ood_csv, write_tradeoff_csv, write_trajectory_csv, write_tune_trace_csv, Provenance,
};
use vess_core::{Error, Result};

#[derive(Parser)]
#[command(name = "vess", version, about = "Scenario-based dispatch with certified violation levels")]
struct Cli {
    /// JSON run configuration; the built-in study defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a training scenario set and write it as CSV.
    Generate {
        /// Number of scenarios; defaults to the training size.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Solve one dispatch program over a scenario file.
    Solve {
        #[arg(long, value_enum)]
        variant: Variant,
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
    /// Certify a stored decision against the scenarios it was trained on.
    Certify {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        decision: Option<PathBuf>,
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
    /// Run one of the study experiments and write its tables.
    Experiment {
        #[arg(long, value_enum)]
        which: Which,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Variant {
    Base,
    Robust,
    Scenario,
    Relaxed,
    Adversarial,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Apriori,
    Posteriori,
    Adversarial,
    Dro,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Tradeoff,
    Ood,
    Calibration,
    Tune,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_)
        | Error::DimensionMismatch { .. }
        | Error::Domain(_)
        | Error::DegenerateDirection(_)
        | Error::Json(_)
        | Error::Csv(_) => 2,
        Error::Infeasible { .. } | Error::Unbounded => 3,
        Error::NumericalFailure(_) => 4,
        Error::NotAttained { .. } => 5,
        Error::Io(_) => 1,
    }
}

fn error_payload(e: &Error) -> Value {
    let mut v = json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": exit_code(e),
    });
    match e {
        Error::Infeasible { rows } => v["rows"] = json!(rows),
        Error::NotAttained { goal, best, iterations } => {
            v["goal"] = json!(goal);
            v["best"] = json!(best);
            v["iterations"] = json!(iterations);
        }
        _ => {}
    }
    v
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_payload(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    seed: u64,
    out: PathBuf,
    prov: Provenance,
    written: Vec<String>,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let mut cfg = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::study_default(),
        };
        if let Some(s) = cli.seed {
            cfg.seeds.master = s;
        }
        cfg.validate()?;
        fs::create_dir_all(&cli.out)?;
        let seed = cfg.seeds.master;
        let prov = Provenance::new(&cfg, seed)?;
        Ok(Ctx {
            cfg,
            seed,
            out: cli.out.clone(),
            prov,
            written: Vec::new(),
        })
    }

    fn json(&mut self, name: &str, key: &str, payload: Value) -> Result<()> {
        let doc = json!({ "provenance": self.prov, key: payload });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    /// CSV with a `.provenance.json` sidecar.
    fn csv(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.put(name, &buf)?;
        let stem = name.trim_end_matches(".csv");
        let mut text = serde_json::to_string_pretty(&json!({ "provenance": self.prov }))?;
        text.push('\n');
        self.put(&format!("{stem}.provenance.json"), text.as_bytes())
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, bytes)?;
        self.written.push(path.display().to_string());
        Ok(())
    }

    fn summary(&self, extra: Value) -> Value {
        let mut v = json!({ "seed": self.seed, "written": self.written });
        if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
            m.extend(e);
        }
        v
    }

    fn input(&self, flag: &Option<PathBuf>, fallback: &Option<String>, what: &str) -> Result<PathBuf> {
        flag.clone()
            .or_else(|| fallback.as_ref().map(PathBuf::from))
            .ok_or_else(|| Error::Validation(format!("no {what} path given by flag or config")))
    }
}

fn run(cli: &Cli) -> Result<Value> {
    let mut ctx = Ctx::new(cli)?;
    match &cli.cmd {
        Cmd::Generate { n } => {
            let n = n.unwrap_or(ctx.cfg.training.n);
            generate(&mut ctx, n)
        }
        Cmd::Solve { variant, scenarios } => {
            let path = ctx.input(scenarios, &ctx.cfg.paths.scenarios, "scenarios")?;
            solve(&mut ctx, *variant, &path)
        }
        Cmd::Certify {
            method,
            decision,
            scenarios,
        } => {
            let dpath = ctx.input(decision, &ctx.cfg.paths.decision, "decision")?;
            let spath = ctx.input(scenarios, &ctx.cfg.paths.scenarios, "scenarios")?;
            certify(&mut ctx, *method, &dpath, &spath)
        }
        Cmd::Experiment { which } => match which {
            Which::Tradeoff => exp_tradeoff(&mut ctx),
            Which::Ood => exp_ood(&mut ctx),
            Which::Calibration => exp_calibration(&mut ctx),
            Which::Tune => exp_tune(&mut ctx),
        },
    }
}

fn generate(ctx: &mut Ctx, n: usize) -> Result<Value> {
    let set = training_set(&ctx.cfg.study(), n, ctx.seed)?;
    ctx.csv("scenarios.csv", |buf| write_scenarios(&set, buf))?;
    Ok(ctx.summary(json!({ "n": set.len(), "k": set.k(), "data_seed": set.seed })))
}

fn build(ctx: &Ctx, variant: Variant, set: &ScenarioSet) -> Result<Program> {
    let study = ctx.cfg.study();
    let (h, p, q) = (&study.horizon, &study.prices, &study.requests);
    match variant {
        Variant::Base => build_plm_base(h, p, q, &set.scenarios[0]),
        Variant::Robust => build_plm_robust(h, p, q, &set.envelope()),
        Variant::Scenario => build_plm_scenario(h, p, q, set),
        Variant::Relaxed => build_plm_relaxed(h, p, q, set, ctx.cfg.training.rho),
        Variant::Adversarial => {
            let a = &ctx.cfg.adversarial;
            let cloud = training_cloud(set, a.sigma, a.m, ctx.seed)?;
            build_plm_adversarial(h, p, q, &cloud, a.rho)
        }
    }
}

fn solve_summary(report: &SolveReport, prog: &Program) -> Value {
    json!({
        "status": report.status,
        "objective": report.objective,
        "iterations": report.iterations,
        "rounds": report.rounds,
        "working_rows": report.working_rows,
        "total_rows": prog.lp.rows.len(),
        "primal_residual": report.primal_residual,
    })
}

fn solve(ctx: &mut Ctx, variant: Variant, path: &Path) -> Result<Value> {
    let set = load_scenarios(path)?;
    let prog = build(ctx, variant, &set)?;
    let (dec, report) = prog.solve()?;
    let payload = json!({
        "variant": variant,
        "n": set.len(),
        "decision": dec,
        "solve": solve_summary(&report, &prog),
    });
    ctx.json("decision.json", "result", payload)?;
    Ok(ctx.summary(json!({ "objective": dec.objective })))
}

fn read_decision(path: &Path) -> Result<Decision> {
    let v: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let inner = v.get("result").and_then(|r| r.get("decision")).cloned().unwrap_or(v);
    Ok(serde_json::from_value(inner)?)
}

fn certify(ctx: &mut Ctx, method: Method, dpath: &Path, spath: &Path) -> Result<Value> {
    let dec = read_decision(dpath)?;
    let set = load_scenarios(spath)?;
    let study = ctx.cfg.study();
    let delta = ctx.cfg.certificates.delta;
    let n = set.len();
    let (cert, complexity) = match method {
        Method::Apriori => (CertificateReport::apriori(n, study.horizon.k, delta)?, None),
        Method::Posteriori => {
            let c = relaxed_complexity(&dec, &set, &study.requests, &study.horizon, study.rule, COMPLEXITY_TOL)?;
            let cert = CertificateReport::posteriori(CertificateMethod::Posteriori, n, c.count, delta)?;
            (cert, Some(c))
        }
        Method::Adversarial | Method::Dro => {
            let a = &ctx.cfg.adversarial;
            let cloud = training_cloud(&set, a.sigma, a.m, ctx.seed)?;
            let c = adversarial_complexity(&dec, &cloud, &study.requests, &study.horizon, COMPLEXITY_TOL)?;
            let mut cert = CertificateReport::posteriori(CertificateMethod::Adversarial, n, c.count, delta)?;
            if matches!(method, Method::Dro) {
                cert = cert.with_ambiguity(&ctx.cfg.ambiguity)?;
            }
            (cert, Some(c))
        }
    };
    ctx.json(
        "certificate.json",
        "result",
        json!({ "certificate": cert, "complexity": complexity }),
    )?;
    Ok(ctx.summary(json!({ "eps_lower": cert.eps_lower, "eps_upper": cert.eps_upper })))
}

fn exp_tradeoff(ctx: &mut Ctx) -> Result<Value> {
    let s = &ctx.cfg.sweep;
    let table = tradeoff_sweep(&s.r_values, &s.n_values, &ctx.cfg.sweep_config(), &ctx.cfg.study(), ctx.seed)?;
    ctx.csv("tradeoff.csv", |buf| write_tradeoff_csv(&table, buf))?;
    ctx.json("tradeoff.json", "result", json!(table))?;
    Ok(ctx.summary(json!({ "cells": table.rows.len() })))
}

fn exp_ood(ctx: &mut Ctx) -> Result<Value> {
    let study = ctx.cfg.study();
    let a = &ctx.cfg.adversarial;
    let set = training_set(&study, ctx.cfg.ood.n, ctx.seed)?;
    let cloud = training_cloud(&set, a.sigma, a.m, ctx.seed)?;
    let run = run_adversarial(&study, &cloud, a.rho, ctx.cfg.certificates.delta, &ctx.cfg.ambiguity)?;
    let out = ood_experiment(
        &run.decision,
        run.certificate.eps_upper,
        &ctx.cfg.ood_config(),
        &study,
        ctx.seed,
    )?;
    ctx.csv("ood.csv", |buf| write_ood_csv(&out.report, buf))?;
    let traj = trajectory_report(&run.decision);
    ctx.csv("trajectory.csv", |buf| write_trajectory_csv(&traj, buf))?;
    ctx.json("ood.json", "result", json!({ "run": run, "ood": out }))?;
    Ok(ctx.summary(json!({
        "worst": out.report.worst,
        "bound": out.report.bound,
        "bounded": out.report.bounded,
    })))
}

fn exp_calibration(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg.calibration_config();
    let report = calibration_trial(&cfg, ctx.cfg.calibration.trials, derive_seed(ctx.seed, "calibration"))?;
    ctx.csv("calibration.csv", |buf| write_calibration_csv(&report, buf))?;
    ctx.json("calibration.json", "result", json!(report))?;
    Ok(ctx.summary(json!({
        "miscoverage": report.miscoverage,
        "miscoverage_limit": report.miscoverage_limit,
        "posteriori_ok": report.posteriori_ok,
        "apriori_exceedance": report.apriori_exceedance,
        "apriori_limit": report.apriori_limit,
        "apriori_ok": report.apriori_ok,
    })))
}

fn exp_tune(ctx: &mut Ctx) -> Result<Value> {
    let tcfg = ctx.cfg.tune_config();
    let outcome = tune(&tcfg, &ctx.cfg.study(), ctx.seed)?;
    ctx.csv("tune_trace.csv", |buf| write_tune_trace_csv(&outcome.trace, buf))?;
    let traj = trajectory_report(&outcome.decision);
    ctx.csv("trajectory.csv", |buf| write_trajectory_csv(&traj, buf))?;
    ctx.json("tune.json", "result", json!(outcome))?;
    outcome.require_attained(tcfg.eps_goal)?;
    Ok(ctx.summary(json!({ "eps": outcome.eps, "iterations": outcome.trace.len() })))
}
