#![allow(dead_code)]

use vess_core::config::RunConfig;
use vess_core::datagen::{generate_scenarios, GeneratorSpec};
use vess_core::model::{BalanceMode, HorizonConfig, PriceSchedule, RequestSchedule, ScenarioSet};
use vess_core::orchestrate::Study;

pub fn study() -> Study {
    RunConfig::study_default().study()
}

/// Generator with `k` steps cycling through the study's loss profile.
pub fn generator(k: usize) -> GeneratorSpec {
    let base = study().generator;
    GeneratorSpec {
        k,
        loss_mean: (0..k).map(|t| base.loss_mean[t % base.k]).collect(),
        ..base
    }
}

pub struct Instance {
    pub cfg: HorizonConfig,
    pub prices: PriceSchedule,
    pub q: RequestSchedule,
    pub set: ScenarioSet,
}

/// Study-shaped instance with `k` steps and `n` generated samples.
pub fn instance(k: usize, n: usize, seed: u64) -> Instance {
    let s = study();
    let cycle = |v: &[f64]| (0..k).map(|t| v[t % v.len()]).collect::<Vec<f64>>();
    Instance {
        cfg: HorizonConfig::new(k, 5.0).with_balance(BalanceMode::Equality),
        prices: PriceSchedule {
            pi_plus: cycle(&s.prices.pi_plus),
            pi_minus: cycle(&s.prices.pi_minus),
        },
        q: RequestSchedule { q: cycle(&s.requests.q) },
        set: generate_scenarios(&generator(k), n, seed).unwrap(),
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
