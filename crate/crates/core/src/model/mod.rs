//! Domain types and the dispatch programs, each translated into a tagged LP.

mod build;
mod io;
mod types;

pub use build::{
    build_plm_adversarial, build_plm_base, build_plm_max_loss, build_plm_relaxed, build_plm_robust,
    build_plm_scenario, objective_value, Layout, Program,
};
pub use io::{load_scenarios, read_scenarios, save_scenarios, write_scenarios};
pub use types::{
    BalanceMode, BoxSupport, Decision, HorizonConfig, ObjectiveMode, PerturbationCloud, PriceSchedule,
    ProgramKind, RequestSchedule, Scenario, ScenarioSet,
};

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_step(b0: f64, mode: BalanceMode) -> HorizonConfig {
        HorizonConfig::new(1, 5.0).with_b0(b0).with_balance(mode)
    }

    fn prices1() -> PriceSchedule {
        PriceSchedule::flat(1, 1.0, 0.5)
    }

    fn solve(p: &Program) -> Decision {
        p.solve().expect("solvable").0
    }

    #[test]
    fn base_zero_instance_does_nothing() {
        let cfg = one_step(0.0, BalanceMode::Equality);
        let s = Scenario::new(vec![0.0], vec![10.0]);
        let d = solve(&build_plm_base(&cfg, &prices1(), &RequestSchedule::zeros(1), &s).unwrap());
        assert_abs_diff_eq!(d.r[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.objective, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn base_sells_stored_energy_down_to_zero() {
        let cfg = one_step(2.0, BalanceMode::Equality);
        let s = Scenario::new(vec![1.0], vec![10.0]);
        let d = solve(&build_plm_base(&cfg, &prices1(), &RequestSchedule::zeros(1), &s).unwrap());
        assert_abs_diff_eq!(d.r[0], -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.b[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.objective, -0.5, epsilon = 1e-9);
    }

    #[test]
    fn base_buys_to_cover_withdrawal() {
        let cfg = one_step(0.0, BalanceMode::Equality);
        let s = Scenario::new(vec![0.0], vec![10.0]);
        let q = RequestSchedule { q: vec![-2.0] };
        let d = solve(&build_plm_base(&cfg, &prices1(), &q, &s).unwrap());
        assert_abs_diff_eq!(d.r[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.b[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.objective, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn robust_envelope_sells_at_cap() {
        let cfg = one_step(0.0, BalanceMode::Envelope);
        let sup = BoxSupport {
            ell_max: vec![1.0],
            beta_min: vec![10.0],
        };
        let d = solve(&build_plm_robust(&cfg, &prices1(), &RequestSchedule::zeros(1), &sup).unwrap());
        assert_abs_diff_eq!(d.r[0], -5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.objective, -2.5, epsilon = 1e-9);
    }

    #[test]
    fn robust_infeasible_when_cap_is_zero_and_injection_too_large() {
        let cfg = one_step(0.0, BalanceMode::Equality);
        let sup = BoxSupport {
            ell_max: vec![0.0],
            beta_min: vec![0.0],
        };
        let q = RequestSchedule { q: vec![7.0] };
        let err = build_plm_robust(&cfg, &prices1(), &q, &sup).unwrap().solve().unwrap_err();
        assert_eq!(err.kind(), "infeasible");
    }

    #[test]
    fn scenario_envelope_one_step() {
        let cfg = one_step(0.0, BalanceMode::Envelope);
        let set = ScenarioSet::new(vec![Scenario::new(vec![1.0], vec![10.0])]);
        let d = solve(&build_plm_scenario(&cfg, &prices1(), &RequestSchedule::zeros(1), &set).unwrap());
        assert_abs_diff_eq!(d.r[0], -5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.b[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.u[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.objective, -2.5, epsilon = 1e-9);
    }

    #[test]
    fn scenario_u_is_max_loss() {
        let cfg = one_step(0.0, BalanceMode::Envelope);
        let set = ScenarioSet::new(vec![
            Scenario::new(vec![1.0], vec![10.0]),
            Scenario::new(vec![3.0], vec![8.0]),
        ]);
        let p = build_plm_scenario(&cfg, &prices1(), &RequestSchedule::zeros(1), &set).unwrap();
        let d = solve(&p);
        assert_abs_diff_eq!(d.u[0], 3.0, epsilon = 1e-9);
        assert!(d.b[0] <= 8.0 + 1e-9);
    }

    #[test]
    fn variable_count_and_tags() {
        let cfg = HorizonConfig::new(3, 5.0);
        let set = ScenarioSet::new(vec![
            Scenario::new(vec![0.1; 3], vec![4.0; 3]),
            Scenario::new(vec![0.2; 3], vec![5.0; 3]),
        ]);
        let pr = PriceSchedule::flat(3, 1.0, 0.5);
        let q = RequestSchedule::zeros(3);
        let s = build_plm_scenario(&cfg, &pr, &q, &set).unwrap();
        assert_eq!(s.lp.num_vars(), 12);
        let r = build_plm_relaxed(&cfg, &pr, &q, &set, 1.0).unwrap();
        assert_eq!(r.lp.num_vars(), 14);
        for i in 0..2 {
            assert!(r.lp.sampled_rows(i).count() >= 2 * 3);
        }
    }

    #[test]
    fn objective_examples() {
        let pr = PriceSchedule::flat(2, 1.0, 0.5);
        assert_eq!(objective_value(&pr, &[0.0, 0.0], ObjectiveMode::Arbitrage), 0.0);
        assert_abs_diff_eq!(objective_value(&pr, &[2.0, -3.0], ObjectiveMode::Arbitrage), 0.5);
        assert_abs_diff_eq!(objective_value(&pr, &[2.0, -3.0], ObjectiveMode::Printed), 5.0);
        let lin = PriceSchedule::flat(2, 0.7, 0.7);
        assert_abs_diff_eq!(
            objective_value(&lin, &[2.0, -3.0], ObjectiveMode::Arbitrage),
            0.7 * 2.0 - 0.7 * 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let set = ScenarioSet::new(vec![
            Scenario::new(vec![0.1, 1.0 / 3.0], vec![std::f64::consts::PI, 7.0]),
            Scenario::new(vec![1e-300, 0.0], vec![2.5e10, 0.30000000000000004]),
        ]);
        let mut buf = Vec::new();
        write_scenarios(&set, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("scenario,k,ell,beta\n0,1,"));
        let back = read_scenarios(buf.as_slice()).unwrap();
        assert_eq!(back.scenarios, set.scenarios);
    }

    #[test]
    fn empty_set_rejected() {
        let cfg = HorizonConfig::new(1, 5.0);
        let err = build_plm_scenario(&cfg, &prices1(), &RequestSchedule::zeros(1), &ScenarioSet::new(vec![]))
            .unwrap_err();
        assert_eq!(err.kind(), "validation");
    }
}
