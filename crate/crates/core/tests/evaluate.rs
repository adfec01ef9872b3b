mod common;

use common::{generator, instance};
use proptest::prelude::*;
use vess_core::datagen::{generate_scenarios, uniform_scenarios, ShiftFamily, ShiftVariant, W2Estimate};
use vess_core::datagen::ShiftDirection;
use vess_core::evaluate::*;
use vess_core::model::*;

fn flat_decision(k: usize, u: f64, b: f64) -> Decision {
    Decision {
        program: ProgramKind::Scenario,
        r: vec![0.0; k],
        b: vec![b; k],
        u: vec![u; k],
        xi: Vec::new(),
        objective: 0.0,
        penalty: 0.0,
        rho: None,
    }
}

#[test]
fn uniform_loss_violates_with_its_tail_probability() {
    let cfg = HorizonConfig::new(1, 5.0).with_balance(BalanceMode::Equality);
    let q = RequestSchedule::zeros(1);
    let test = uniform_scenarios(1, (0.0, 1.0), (5.0, 10.0), 100_000, 8).unwrap();
    for u in [0.2, 0.5, 0.93] {
        let stats = empirical_violation(&flat_decision(1, u, 0.0), &test, &q, &cfg, ViolationRule::Sampled).unwrap();
        let p = 1.0 - u;
        let se = (p * (1.0 - p) / 1e5).sqrt();
        assert!((stats.rate - p).abs() <= 3.0 * se, "u {u}: {} vs {p}", stats.rate);
        assert_eq!(stats.rate, stats.violated_count as f64 / stats.test_size as f64);
    }
}

#[test]
fn training_data_never_violates_its_own_scenario_solution() {
    let inst = instance(12, 200, 31);
    let (dec, _) = build_plm_scenario(&inst.cfg, &inst.prices, &inst.q, &inst.set).unwrap().solve().unwrap();
    let stats = empirical_violation(&dec, &inst.set, &inst.q, &inst.cfg, ViolationRule::Sampled).unwrap();
    assert_eq!(stats.violated_count, 0);
}

#[test]
fn saturated_plan_only_breaks_on_capacity() {
    let inst = instance(12, 1, 0);
    let test = generate_scenarios(&generator(12), 5000, 1).unwrap();
    let stats = empirical_violation(&flat_decision(12, 1e9, 0.0), &test, &inst.q, &inst.cfg, ViolationRule::Sampled).unwrap();
    assert_eq!(stats.violated_count, 0);
}

#[test]
fn larger_loss_bound_never_adds_violations() {
    let inst = instance(12, 1, 0);
    let test = generate_scenarios(&generator(12), 5000, 2).unwrap();
    let mut last = usize::MAX;
    for u in [0.2, 0.5, 0.8, 1.1, 1.5] {
        let c = empirical_violation(&flat_decision(12, u, 1.0), &test, &inst.q, &inst.cfg, ViolationRule::Sampled)
            .unwrap()
            .violated_count;
        assert!(c <= last);
        last = c;
    }
}

fn trivial_family(spec: &vess_core::datagen::GeneratorSpec) -> ShiftFamily {
    ShiftFamily {
        nominal: spec.clone(),
        variants: vec![ShiftVariant {
            spec: spec.clone(),
            direction: ShiftDirection {
                loss_mean: vec![0.0; spec.k],
                loss_spread: 0.0,
                beta_bar: 0.0,
                occ_start: 0.0,
                occ_step: 0.0,
            },
            scale: 0.0,
            w2sq: W2Estimate {
                mean: 0.0,
                std_err: 0.0,
                pairs: 2,
            },
        }],
        mu: 0.0,
        seed: 0,
    }
}

#[test]
fn nominal_only_family_reports_the_out_of_sample_rate() {
    let inst = instance(12, 100, 3);
    let (dec, _) = build_plm_scenario(&inst.cfg, &inst.prices, &inst.q, &inst.set).unwrap().solve().unwrap();
    let spec = generator(12);
    let seed = 555;
    let rep = ood_metrics(&dec, &trivial_family(&spec), &inst.q, &inst.cfg, ViolationRule::Sampled, 4000, 1.0, seed).unwrap();
    let test = generate_scenarios(&spec, 4000, seed).unwrap();
    let direct = empirical_violation(&dec, &test, &inst.q, &inst.cfg, ViolationRule::Sampled).unwrap().rate;
    assert_eq!(rep.mean, direct);
    assert_eq!(rep.worst, direct);
    assert_eq!(rep.best, direct);
    assert!(rep.bounded);
}

#[test]
fn bounded_flag_has_no_slack() {
    let inst = instance(12, 100, 3);
    let (dec, _) = build_plm_scenario(&inst.cfg, &inst.prices, &inst.q, &inst.set).unwrap().solve().unwrap();
    let fam = trivial_family(&generator(12));
    let at = |bound| ood_metrics(&dec, &fam, &inst.q, &inst.cfg, ViolationRule::Sampled, 2000, bound, 1).unwrap();
    let worst = at(1.0).worst;
    assert!(worst > 0.0);
    assert!(at(worst).bounded);
    assert!(!at(worst - 1e-15).bounded);
}

#[test]
fn deterministic_data_saturates_the_complexity() {
    let cfg = CalibrationConfig {
        horizon: HorizonConfig::new(2, 10.0).with_balance(BalanceMode::Equality),
        prices: PriceSchedule {
            pi_plus: vec![1.0, 3.0],
            pi_minus: vec![0.8, 2.5],
        },
        requests: RequestSchedule::zeros(2),
        data: CalibrationData::Uniform {
            ell: (0.5, 0.5),
            beta: (7.0, 7.0),
        },
        n: 20,
        rho: 0.1,
        delta: 0.05,
        apriori_n: 20,
        apriori_delta: 0.1,
        test_size: 100,
        rule: ViolationRule::Sampled,
    };
    let rep = calibration_trial(&cfg, 4, 1).unwrap();
    // identical samples are all active; only the upper side survives this degeneracy
    for t in &rep.records {
        assert_eq!(t.violation, 0.0);
        assert_eq!(t.complexity, 20);
        assert_eq!(t.eps_upper, 1.0);
        assert!(t.eps_lower > 0.0 && t.outside);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rate_ignores_test_order(seed in any::<u64>(), perm in Just((0..200).collect::<Vec<usize>>()).prop_shuffle()) {
        let inst = instance(12, 30, seed);
        let (dec, _) = build_plm_relaxed(&inst.cfg, &inst.prices, &inst.q, &inst.set, 0.02).unwrap().solve().unwrap();
        let test = generate_scenarios(&generator(12), 200, seed ^ 7).unwrap();
        let shuffled = ScenarioSet::new(perm.iter().map(|&i| test.scenarios[i].clone()).collect());
        for rule in [ViolationRule::Sampled, ViolationRule::Balance] {
            let a = empirical_violation(&dec, &test, &inst.q, &inst.cfg, rule).unwrap();
            let b = empirical_violation(&dec, &shuffled, &inst.q, &inst.cfg, rule).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
