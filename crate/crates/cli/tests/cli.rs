use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use vess_core::config::RunConfig;
use vess_core::model::load_scenarios;
use vess_core::orchestrate::training_set;

fn vess(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vess")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, cfg: &RunConfig) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::study_default();
    cfg.training.n = 200;
    cfg.ood.n = 200;
    cfg.ood.test_size = 300;
    cfg.ood.w2_pairs = 200;
    cfg.calibration.trials = 20;
    cfg.calibration.test_size = 2000;
    cfg
}

fn error_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("machine-readable error")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn generate_writes_every_step_and_reloads_exactly() {
    let dir = TempDir::new().unwrap();
    let cfg = RunConfig::study_default();
    let conf = write_config(dir.path(), &cfg);
    let out = dir.path().join("a");
    let o = vess(&["generate", "--config", s(&conf), "--out", s(&out), "--n", "2000"]);
    assert!(o.status.success());
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["seed"], cfg.seeds.master);
    let csv = out.join("scenarios.csv");
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1 + 24_000);
    let loaded = load_scenarios(&csv).unwrap();
    let direct = training_set(&cfg.study(), 2000, cfg.seeds.master).unwrap();
    assert_eq!(loaded.scenarios, direct.scenarios);
    assert_eq!(json(&out.join("scenarios.provenance.json"))["provenance"]["seed"], cfg.seeds.master);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(vess(&["generate", "--out", s(&a), "--seed", "1"]).status.success());
    assert!(vess(&["generate", "--out", s(&b), "--seed", "2"]).status.success());
    let read = |d: &Path| std::fs::read(d.join("scenarios.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
}

#[test]
fn scenario_variant_matches_heavily_penalized_relaxation() {
    let dir = TempDir::new().unwrap();
    let mut cfg = small_config();
    cfg.training.rho = 1e6;
    let conf = write_config(dir.path(), &cfg);
    let out = dir.path().join("o");
    assert!(vess(&["generate", "--config", s(&conf), "--out", s(&out)]).status.success());
    let scen = out.join("scenarios.csv");
    let mut decisions = Vec::new();
    for variant in ["scenario", "relaxed"] {
        let o = vess(&["solve", "--config", s(&conf), "--out", s(&out), "--variant", variant, "--scenarios", s(&scen)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        decisions.push(json(&out.join("decision.json"))["result"]["decision"].clone());
    }
    for key in ["r", "b"] {
        let a = decisions[0][key].as_array().unwrap();
        let b = decisions[1][key].as_array().unwrap();
        for (x, y) in a.iter().zip(b) {
            assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() <= 1e-5);
        }
    }
}

#[test]
fn certify_methods_report_ordered_intervals() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config();
    let conf = write_config(dir.path(), &cfg);
    let out = dir.path().join("o");
    let scen = out.join("scenarios.csv");
    let dec = out.join("decision.json");
    assert!(vess(&["generate", "--config", s(&conf), "--out", s(&out)]).status.success());
    assert!(vess(&["solve", "--config", s(&conf), "--out", s(&out), "--variant", "adversarial", "--scenarios", s(&scen)])
        .status
        .success());
    let mut certs = Vec::new();
    for method in ["apriori", "posteriori", "adversarial", "dro"] {
        let o = vess(&[
            "certify", "--config", s(&conf), "--out", s(&out), "--method", method, "--decision", s(&dec), "--scenarios",
            s(&scen),
        ]);
        assert!(o.status.success(), "{method}: {}", String::from_utf8_lossy(&o.stderr));
        let c = json(&out.join("certificate.json"))["result"]["certificate"].clone();
        assert_eq!(c["method"], method);
        assert!(c["eps_lower"].as_f64().unwrap() <= c["eps_upper"].as_f64().unwrap());
        certs.push(c);
    }
    let adv = certs[2]["eps_upper"].as_f64().unwrap();
    let dro = certs[3]["eps_upper"].as_f64().unwrap();
    let addend = cfg.ambiguity.mu / cfg.ambiguity.r();
    assert_eq!(dro, (adv + addend).min(1.0));
    assert_eq!(certs[3]["dro_addend"].as_f64().unwrap(), addend);
}

#[test]
fn apriori_on_too_few_samples_is_a_validation_exit() {
    let dir = TempDir::new().unwrap();
    let conf = write_config(dir.path(), &small_config());
    let out = dir.path().join("o");
    assert!(vess(&["generate", "--config", s(&conf), "--out", s(&out), "--n", "20"]).status.success());
    let scen = out.join("scenarios.csv");
    assert!(vess(&["solve", "--config", s(&conf), "--out", s(&out), "--variant", "scenario", "--scenarios", s(&scen)])
        .status
        .success());
    let o = vess(&[
        "certify", "--config", s(&conf), "--out", s(&out), "--method", "apriori", "--decision",
        s(&out.join("decision.json")), "--scenarios", s(&scen),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["error"], "domain");
}

#[test]
fn infeasible_solve_exits_three_and_names_rows() {
    let dir = TempDir::new().unwrap();
    let mut cfg = small_config();
    cfg.requests.q[0] = 10.0;
    let conf = write_config(dir.path(), &cfg);
    let scen = dir.path().join("zero_caps.csv");
    let mut text = String::from("scenario,k,ell,beta\n");
    for k in 1..=12 {
        text.push_str(&format!("0,{k},0,0\n"));
    }
    std::fs::write(&scen, text).unwrap();
    let o = vess(&["solve", "--config", s(&conf), "--out", s(dir.path()), "--variant", "base", "--scenarios", s(&scen)]);
    assert_eq!(o.status.code(), Some(3));
    let err = error_of(&o);
    assert_eq!(err["error"], "infeasible");
    assert!(!err["rows"].as_array().unwrap().is_empty());
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = TempDir::new().unwrap();
    let mut v = serde_json::to_value(RunConfig::study_default()).unwrap();
    v["horizon"]["k_hat"] = 3.into();
    let conf = dir.path().join("bad.json");
    std::fs::write(&conf, v.to_string()).unwrap();
    let o = vess(&["generate", "--config", s(&conf), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["error"], "json");
}

#[test]
fn empty_sweep_grid_exits_two() {
    let dir = TempDir::new().unwrap();
    let mut cfg = small_config();
    cfg.sweep.r_values.clear();
    let conf = write_config(dir.path(), &cfg);
    let o = vess(&["experiment", "--config", s(&conf), "--out", s(dir.path()), "--which", "tradeoff"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["error"], "validation");
}

#[test]
fn missing_input_reports_an_error_payload() {
    let dir = TempDir::new().unwrap();
    let o = vess(&["solve", "--out", s(dir.path()), "--variant", "base", "--scenarios", "/nonexistent/s.csv"]);
    assert!(!o.status.success());
    assert_eq!(error_of(&o)["error"], "io");
}

#[test]
fn unattainable_goal_exits_five_after_writing_the_trace() {
    let dir = TempDir::new().unwrap();
    let mut cfg = small_config();
    cfg.tune.eps_goal = 0.01;
    cfg.tune.n_initial = 100;
    cfg.tune.n_plus = 100;
    cfg.tune.max_iterations = 2;
    let conf = write_config(dir.path(), &cfg);
    let o = vess(&["experiment", "--config", s(&conf), "--out", s(dir.path()), "--which", "tune"]);
    assert_eq!(o.status.code(), Some(5));
    let err = error_of(&o);
    assert_eq!(err["error"], "not_attained");
    assert_eq!(err["iterations"], 2);
    let trace = std::fs::read_to_string(dir.path().join("tune_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3);
}

#[test]
fn ood_experiment_writes_forty_variants_and_the_bound() {
    let dir = TempDir::new().unwrap();
    let conf = write_config(dir.path(), &small_config());
    let o = vess(&["experiment", "--config", s(&conf), "--out", s(dir.path()), "--which", "ood"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("ood.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 42);
    assert!(lines[41].starts_with("bound,"));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap().lines().count(),
        13
    );
}

#[test]
fn calibration_emits_a_verdict() {
    let dir = TempDir::new().unwrap();
    let conf = write_config(dir.path(), &small_config());
    let o = vess(&["experiment", "--config", s(&conf), "--out", s(dir.path()), "--which", "calibration"]);
    assert!(o.status.success());
    let rep = &json(&dir.path().join("calibration.json"))["result"];
    assert!(rep["posteriori_ok"].is_boolean());
    assert_eq!(rep["records"].as_array().unwrap().len(), 20);
    let csv = std::fs::read_to_string(dir.path().join("calibration.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
}
