//! Synthetic scenario generation, perturbation clouds and Wasserstein-bounded shifts.
//!
//! Every trajectory is a deterministic function of a block of `2K` standard normals,
//! so two generators can be driven by the same noise (common random numbers).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, ensure_len, Error, Result};
use crate::model::{PerturbationCloud, Scenario, ScenarioSet};

/// Parameters of the synthetic departure-loss and occupancy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub k: usize,
    /// Mean SoC loss per step before clipping at zero.
    pub loss_mean: Vec<f64>,
    pub loss_spread: f64,
    /// Capacity of a full lot.
    pub beta_bar: f64,
    /// Occupancy fraction before step 1.
    pub occ_start: f64,
    /// Standard deviation of one occupancy random-walk step.
    pub occ_step: f64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        ensure(self.k >= 1, || "generator needs K ≥ 1".into())?;
        ensure_len("loss_mean", self.k, self.loss_mean.len())?;
        ensure(self.loss_mean.iter().all(|m| m.is_finite()), || "loss means must be finite".into())?;
        ensure(self.loss_spread >= 0.0 && self.occ_step >= 0.0, || "spreads must be non-negative".into())?;
        ensure(self.beta_bar > 0.0 && self.beta_bar.is_finite(), || "beta_bar must be positive".into())?;
        ensure((0.0..=1.0).contains(&self.occ_start), || "occ_start must lie in [0,1]".into())
    }

    /// Trajectory for one block of noise: `z[..K]` drives losses, `z[K..]` occupancy.
    fn trajectory(&self, z: &[f64]) -> Scenario {
        let k = self.k;
        let ell = (0..k)
            .map(|t| (self.loss_mean[t] + self.loss_spread * z[t]).max(0.0))
            .collect();
        let mut occ = self.occ_start;
        let beta = (0..k)
            .map(|t| {
                occ = (occ + self.occ_step * z[k + t]).clamp(0.0, 1.0);
                self.beta_bar * occ
            })
            .collect();
        Scenario::new(ell, beta)
    }
}

fn noise_block(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// `n` i.i.d. trajectories; the first `n'` of a larger draw equal a draw of size `n'`.
pub fn generate_scenarios(spec: &GeneratorSpec, n: usize, seed: u64) -> Result<ScenarioSet> {
    spec.validate()?;
    ensure(n >= 1, || "need at least one scenario".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenarios = (0..n)
        .map(|_| spec.trajectory(&noise_block(&mut rng, 2 * spec.k)))
        .collect();
    Ok(ScenarioSet {
        scenarios,
        seed: Some(seed),
    })
}

/// `n` trajectories with every loss and capacity entry drawn independently and uniformly.
pub fn uniform_scenarios(k: usize, ell: (f64, f64), beta: (f64, f64), n: usize, seed: u64) -> Result<ScenarioSet> {
    ensure(k >= 1 && n >= 1, || "need K ≥ 1 and N ≥ 1".into())?;
    ensure(0.0 <= ell.0 && ell.0 <= ell.1 && 0.0 <= beta.0 && beta.0 <= beta.1, || {
        "uniform ranges must be ordered and non-negative".into()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    let scenarios = (0..n)
        .map(|_| {
            let l = (0..k).map(|_| draw(ell)).collect();
            let b = (0..k).map(|_| draw(beta)).collect();
            Scenario::new(l, b)
        })
        .collect();
    Ok(ScenarioSet {
        scenarios,
        seed: Some(seed),
    })
}

/// `m` perturbed copies of every sample, each entry shifted by `σ·p`, `p ~ N(0,1)`, then clipped at 0.
pub fn perturb_cloud(set: &ScenarioSet, sigma: f64, m: usize, seed: u64) -> Result<PerturbationCloud> {
    set.validate()?;
    ensure(sigma >= 0.0 && sigma.is_finite(), || format!("sigma must be non-negative, got {sigma}"))?;
    ensure(m >= 1, || "cloud needs M ≥ 1".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shift = |v: f64| {
        let p: f64 = rng.sample(StandardNormal);
        (v + sigma * p).max(0.0)
    };
    let points = set
        .scenarios
        .iter()
        .map(|s| {
            (0..m)
                .map(|_| {
                    let ell = s.ell.iter().map(|&v| shift(v)).collect();
                    let beta = s.beta.iter().map(|&v| shift(v)).collect();
                    Scenario::new(ell, beta)
                })
                .collect()
        })
        .collect();
    Ok(PerturbationCloud {
        base: set.clone(),
        points,
        sigma,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W2Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub pairs: usize,
}

/// Mean squared distance between coupled draws of `a` and `b`; an upper bound on `W₂²`.
pub fn estimate_w2sq(a: &GeneratorSpec, b: &GeneratorSpec, pairs: usize, seed: u64) -> Result<W2Estimate> {
    a.validate()?;
    b.validate()?;
    ensure_len("generator horizon", a.k, b.k)?;
    ensure(pairs >= 2, || "need at least two coupled pairs".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sumsq) = (0.0f64, 0.0f64);
    for _ in 0..pairs {
        let z = noise_block(&mut rng, 2 * a.k);
        let (sa, sb) = (a.trajectory(&z), b.trajectory(&z));
        let d: f64 = sa
            .ell
            .iter()
            .zip(&sb.ell)
            .chain(sa.beta.iter().zip(&sb.beta))
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        sum += d;
        sumsq += d * d;
    }
    let n = pairs as f64;
    let mean = sum / n;
    let var = ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(W2Estimate {
        mean,
        std_err: (var / n).sqrt(),
        pairs,
    })
}

/// Perturbation direction in generator-parameter space, applied with a scale factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftDirection {
    pub loss_mean: Vec<f64>,
    /// Relative change of the loss spread.
    pub loss_spread: f64,
    /// Relative change of the full-lot capacity.
    pub beta_bar: f64,
    pub occ_start: f64,
    /// Relative change of the occupancy step.
    pub occ_step: f64,
}

impl ShiftDirection {
    fn draw(k: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut g = |scale: f64| scale * rng.sample::<f64, _>(StandardNormal);
        ShiftDirection {
            loss_mean: (0..k).map(|_| g(0.1)).collect(),
            loss_spread: g(0.5),
            beta_bar: g(0.05),
            occ_start: g(0.05),
            occ_step: g(0.5),
        }
    }

    pub fn apply(&self, spec: &GeneratorSpec, scale: f64) -> GeneratorSpec {
        GeneratorSpec {
            k: spec.k,
            loss_mean: spec
                .loss_mean
                .iter()
                .zip(&self.loss_mean)
                .map(|(m, d)| m + scale * d)
                .collect(),
            loss_spread: spec.loss_spread * (1.0 + scale * self.loss_spread).max(0.0),
            beta_bar: spec.beta_bar * (1.0 + scale * self.beta_bar).max(1e-3),
            occ_start: (spec.occ_start + scale * self.occ_start).clamp(0.0, 1.0),
            occ_step: spec.occ_step * (1.0 + scale * self.occ_step).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftVariant {
    pub spec: GeneratorSpec,
    pub direction: ShiftDirection,
    pub scale: f64,
    pub w2sq: W2Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftFamily {
    pub nominal: GeneratorSpec,
    pub variants: Vec<ShiftVariant>,
    pub mu: f64,
    pub seed: u64,
}

const SCALE_BISECTIONS: usize = 40;

/// `n_prime` random shifts of `nominal`, each scaled down until its coupled `W₂²` estimate is at most `mu`.
pub fn shift_family(
    nominal: &GeneratorSpec,
    n_prime: usize,
    mu: f64,
    pairs: usize,
    seed: u64,
) -> Result<ShiftFamily> {
    nominal.validate()?;
    ensure(n_prime >= 1, || "shift family needs N' ≥ 1".into())?;
    ensure(mu >= 0.0 && mu.is_finite(), || format!("mu must be non-negative, got {mu}"))?;
    let variants = (0..n_prime)
        .into_par_iter()
        .map(|v| {
            let vseed = seed ^ v as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(vseed);
            let dir = ShiftDirection::draw(nominal.k, &mut rng);
            let est = |scale: f64| estimate_w2sq(nominal, &dir.apply(nominal, scale), pairs, vseed);
            let full = est(1.0)?;
            if full.mean == 0.0 {
                return Err(Error::DegenerateDirection(v));
            }
            let (scale, w2sq) = if full.mean <= mu {
                (1.0, full)
            } else {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                let mut best = est(0.0)?;
                for _ in 0..SCALE_BISECTIONS {
                    let mid = 0.5 * (lo + hi);
                    let e = est(mid)?;
                    if e.mean <= mu {
                        lo = mid;
                        best = e;
                    } else {
                        hi = mid;
                    }
                }
                (lo, best)
            };
            Ok(ShiftVariant {
                spec: dir.apply(nominal, scale),
                direction: dir,
                scale,
                w2sq,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShiftFamily {
        nominal: nominal.clone(),
        variants,
        mu,
        seed,
    })
}
