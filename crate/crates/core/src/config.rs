//! The single JSON run configuration consumed by the command line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certificates::AmbiguitySpec;
use crate::datagen::GeneratorSpec;
use crate::error::{ensure, Result};
use crate::evaluate::{CalibrationConfig, CalibrationData, ViolationRule};
use crate::model::{BalanceMode, HorizonConfig, ObjectiveMode, PriceSchedule, RequestSchedule};
use crate::orchestrate::{OodConfig, Study, SweepConfig, TuneConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSection {
    pub k: usize,
    #[serde(default)]
    pub b0: f64,
    pub r_max: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Modes {
    pub balance: BalanceMode,
    pub objective: ObjectiveMode,
    pub violation: ViolationRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub n: usize,
    /// Penalty used by the relaxed program.
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarialSection {
    pub sigma: f64,
    pub m: usize,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificatesSection {
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSection {
    pub eps_goal: f64,
    pub n_initial: usize,
    pub n_plus: usize,
    pub rho_plus: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub r_values: Vec<f64>,
    pub n_values: Vec<usize>,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OodSection {
    pub n: usize,
    pub n_prime: usize,
    pub test_size: usize,
    pub w2_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub k: usize,
    pub r_max: f64,
    pub pi_plus: Vec<f64>,
    pub pi_minus: Vec<f64>,
    pub q: Vec<f64>,
    pub ell_range: (f64, f64),
    pub beta_range: (f64, f64),
    pub n: usize,
    pub rho: f64,
    pub delta: f64,
    pub apriori_n: usize,
    pub apriori_delta: f64,
    pub trials: usize,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    pub master: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathSection {
    pub scenarios: Option<String>,
    pub decision: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: HorizonSection,
    pub prices: PriceSchedule,
    pub requests: RequestSchedule,
    #[serde(default)]
    pub modes: Modes,
    pub generator: GeneratorSpec,
    pub training: TrainingSection,
    pub adversarial: AdversarialSection,
    pub ambiguity: AmbiguitySpec,
    pub certificates: CertificatesSection,
    pub tune: TuneSection,
    pub sweep: SweepSection,
    pub ood: OodSection,
    pub calibration: CalibrationSection,
    pub seeds: SeedSection,
    #[serde(default)]
    pub paths: PathSection,
}

impl RunConfig {
    /// Twelve-step day with a 5-unit exchange cap and the study's adversarial and ambiguity settings.
    pub fn study_default() -> Self {
        let pi_plus = vec![0.20, 0.18, 0.17, 0.17, 0.19, 0.25, 0.30, 0.32, 0.28, 0.26, 0.30, 0.35];
        RunConfig {
            horizon: HorizonSection {
                k: 12,
                b0: 0.0,
                r_max: 5.0,
            },
            prices: PriceSchedule {
                pi_minus: pi_plus.iter().map(|p| 0.8 * p).collect(),
                pi_plus,
            },
            requests: RequestSchedule {
                q: vec![0.5, 0.5, 0.3, 0.0, -0.2, -0.5, -0.5, 0.2, 0.4, 0.0, -0.3, -0.4],
            },
            modes: Modes {
                balance: BalanceMode::Equality,
                objective: ObjectiveMode::Arbitrage,
                violation: ViolationRule::Sampled,
            },
            generator: GeneratorSpec {
                k: 12,
                loss_mean: vec![0.3, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0, 1.0, 0.8, 0.6, 0.5, 0.4],
                loss_spread: 0.1,
                beta_bar: 20.0,
                occ_start: 0.6,
                occ_step: 0.05,
            },
            training: TrainingSection { n: 500, rho: 0.01 },
            adversarial: AdversarialSection {
                sigma: 0.05,
                m: 6,
                rho: 0.01,
            },
            ambiguity: AmbiguitySpec {
                mu: 1e-3,
                r_ell: 0.005,
                r_beta: 0.005,
            },
            certificates: CertificatesSection { delta: 1e-5 },
            tune: TuneSection {
                eps_goal: 0.13,
                n_initial: 500,
                n_plus: 500,
                rho_plus: 0.0,
                max_iterations: 4,
            },
            sweep: SweepSection {
                r_values: vec![0.0, 0.025, 0.05, 0.1, 0.2],
                n_values: vec![500, 1000],
                test_size: 10_000,
            },
            ood: OodSection {
                n: 2000,
                n_prime: 40,
                test_size: 10_000,
                w2_pairs: 2000,
            },
            calibration: CalibrationSection {
                k: 2,
                r_max: 10.0,
                pi_plus: vec![1.0, 3.0],
                pi_minus: vec![0.8, 2.5],
                q: vec![0.0, 0.0],
                ell_range: (0.0, 1.0),
                beta_range: (5.0, 10.0),
                n: 50,
                rho: 0.1,
                delta: 0.05,
                apriori_n: 200,
                apriori_delta: 0.1,
                trials: 500,
                test_size: 100_000,
            },
            seeds: SeedSection { master: 20_240_601 },
            paths: PathSection::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn horizon_config(&self) -> HorizonConfig {
        HorizonConfig {
            k: self.horizon.k,
            b0: self.horizon.b0,
            r_max: self.horizon.r_max,
            balance_mode: self.modes.balance,
            objective_mode: self.modes.objective,
        }
    }

    pub fn study(&self) -> Study {
        Study {
            horizon: self.horizon_config(),
            prices: self.prices.clone(),
            requests: self.requests.clone(),
            generator: self.generator.clone(),
            rule: self.modes.violation,
        }
    }

    pub fn tune_config(&self) -> TuneConfig {
        TuneConfig {
            eps_goal: self.tune.eps_goal,
            n_initial: self.tune.n_initial,
            n_plus: self.tune.n_plus,
            rho_initial: self.adversarial.rho,
            rho_plus: self.tune.rho_plus,
            delta: self.certificates.delta,
            amb: self.ambiguity.clone(),
            m: self.adversarial.m,
            sigma: self.adversarial.sigma,
            max_iterations: self.tune.max_iterations,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            m: self.adversarial.m,
            rho: self.adversarial.rho,
            delta: self.certificates.delta,
            test_size: self.sweep.test_size,
        }
    }

    pub fn ood_config(&self) -> OodConfig {
        OodConfig {
            n_prime: self.ood.n_prime,
            amb: self.ambiguity.clone(),
            test_size: self.ood.test_size,
            w2_pairs: self.ood.w2_pairs,
        }
    }

    pub fn calibration_config(&self) -> CalibrationConfig {
        let c = &self.calibration;
        CalibrationConfig {
            horizon: HorizonConfig {
                k: c.k,
                b0: 0.0,
                r_max: c.r_max,
                balance_mode: self.modes.balance,
                objective_mode: self.modes.objective,
            },
            prices: PriceSchedule {
                pi_plus: c.pi_plus.clone(),
                pi_minus: c.pi_minus.clone(),
            },
            requests: RequestSchedule { q: c.q.clone() },
            data: CalibrationData::Uniform {
                ell: c.ell_range,
                beta: c.beta_range,
            },
            n: c.n,
            rho: c.rho,
            delta: c.delta,
            apriori_n: c.apriori_n,
            apriori_delta: c.apriori_delta,
            test_size: c.test_size,
            rule: self.modes.violation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.study().validate()?;
        self.ambiguity.validate()?;
        ensure(self.training.n >= 1 && self.training.rho >= 0.0, || "training needs N ≥ 1 and rho ≥ 0".into())?;
        ensure(self.adversarial.m >= 1 && self.adversarial.sigma >= 0.0 && self.adversarial.rho >= 0.0, || {
            "adversarial section needs M ≥ 1, sigma ≥ 0, rho ≥ 0".into()
        })?;
        let d = self.certificates.delta;
        ensure(d > 0.0 && d < 1.0, || format!("delta must lie in (0,1), got {d}"))?;
        self.tune_config().validate()?;
        ensure(!self.sweep.r_values.is_empty() && !self.sweep.n_values.is_empty(), || {
            "sweep grid is empty".into()
        })?;
        ensure(self.sweep.test_size >= 1 && self.ood.test_size >= 1, || "test sizes must be positive".into())?;
        ensure(self.ood.n >= 1 && self.ood.n_prime >= 1 && self.ood.w2_pairs >= 2, || {
            "ood section needs N ≥ 1, N' ≥ 1 and at least two coupling pairs".into()
        })?;
        let c = self.calibration_config();
        c.horizon.validate()?;
        c.prices.validate(c.horizon.k)?;
        c.requests.validate(c.horizon.k)?;
        ensure(self.calibration.trials >= 1 && c.n >= 1 && c.test_size >= 1, || {
            "calibration needs positive trials, N and test size".into()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let cfg = RunConfig::study_default();
        cfg.validate().unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v = serde_json::to_value(RunConfig::study_default()).unwrap();
        v["horizon"]["k_hat"] = serde_json::json!(3);
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
        let mut v = serde_json::to_value(RunConfig::study_default()).unwrap();
        v["extra"] = serde_json::json!({});
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
    }

    #[test]
    fn empty_grid_rejected() {
        let mut cfg = RunConfig::study_default();
        cfg.sweep.r_values.clear();
        assert_eq!(cfg.validate().unwrap_err().kind(), "validation");
    }
}
