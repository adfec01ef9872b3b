//! Finite-sample violation certificates.
//!
//! All binomial quantities are handled in log space; `N` in the low thousands would
//! overflow any direct evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Tag recorded in every report describing how the polynomial roots map to bounds.
pub const ROOT_CONVENTION: &str = "smaller_root_gives_upper_bound";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMethod {
    /// Binomial-tail bound from the support rank `2K`.
    Apriori,
    /// Two-root bound driven by the relaxed complexity.
    Posteriori,
    /// Two-root bound driven by the adversarial complexity.
    Adversarial,
    /// Adversarial bound inflated by the Wasserstein addend `μ/R`.
    Dro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbiguitySpec {
    pub mu: f64,
    pub r_ell: f64,
    pub r_beta: f64,
}

impl AmbiguitySpec {
    pub fn r(&self) -> f64 {
        self.r_ell + self.r_beta
    }

    pub fn addend(&self) -> f64 {
        self.mu / self.r()
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.mu >= 0.0 && self.mu.is_finite(), || format!("mu must be non-negative, got {}", self.mu))?;
        ensure(self.r_ell >= 0.0 && self.r_beta >= 0.0 && self.r() > 0.0, || {
            format!("R = R_ell + R_beta must be positive, got {} + {}", self.r_ell, self.r_beta)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub method: CertificateMethod,
    pub delta: f64,
    pub eps_lower: f64,
    pub eps_upper: f64,
    /// Complexity count `m`; for the a-priori bound this is the support rank `2K`.
    pub complexity: usize,
    pub n: usize,
    pub t_small: Option<f64>,
    pub t_large: Option<f64>,
    pub dro_addend: Option<f64>,
    /// Set when the inflated bound was clamped to 1.
    pub vacuous: bool,
    pub convention: String,
}

impl CertificateReport {
    pub fn apriori(n: usize, k: usize, delta: f64) -> Result<Self> {
        let eps = apriori_epsilon(n, k, delta)?;
        Ok(CertificateReport {
            method: CertificateMethod::Apriori,
            delta,
            eps_lower: 0.0,
            eps_upper: eps,
            complexity: 2 * k,
            n,
            t_small: None,
            t_large: None,
            dro_addend: None,
            vacuous: false,
            convention: ROOT_CONVENTION.into(),
        })
    }

    pub fn posteriori(method: CertificateMethod, n: usize, m: usize, delta: f64) -> Result<Self> {
        let b = posteriori_bounds(n, m, delta)?;
        Ok(CertificateReport {
            method,
            delta,
            eps_lower: b.eps_lower,
            eps_upper: b.eps_upper,
            complexity: m,
            n,
            t_small: Some(b.t_small),
            t_large: Some(b.t_large),
            dro_addend: None,
            vacuous: false,
            convention: ROOT_CONVENTION.into(),
        })
    }

    /// Inflates an adversarial report by the ambiguity addend.
    pub fn with_ambiguity(&self, amb: &AmbiguitySpec) -> Result<Self> {
        let d = dro_bound(self.eps_upper, amb)?;
        Ok(CertificateReport {
            method: CertificateMethod::Dro,
            eps_upper: d.bound,
            dro_addend: Some(d.addend),
            vacuous: d.vacuous,
            ..self.clone()
        })
    }
}

/// `ln C(n, i)` for `i = 0..=imax`, accumulated term by term.
fn log_binomials(n: usize, imax: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(imax + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for i in 1..=imax.min(n) {
        acc += ((n - i + 1) as f64).ln() - (i as f64).ln();
        out.push(acc);
    }
    out
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

fn check_apriori(n: usize, k: usize) -> Result<()> {
    if n <= 2 * k {
        return Err(Error::Domain(format!("a-priori bound needs N > 2K, got N={n}, K={k}")));
    }
    Ok(())
}

/// `Σ_{i<2K} C(N,i) ε^i (1−ε)^{N−i}`: the confidence level attached to violation level `ε`.
pub fn apriori_delta(n: usize, k: usize, eps: f64) -> Result<f64> {
    check_apriori(n, k)?;
    ensure((0.0..=1.0).contains(&eps), || format!("eps must lie in [0,1], got {eps}"))?;
    if eps == 0.0 {
        return Ok(1.0);
    }
    if eps == 1.0 {
        return Ok(0.0);
    }
    let d = 2 * k;
    let lb = log_binomials(n, d - 1);
    let (le, l1e) = (eps.ln(), (-eps).ln_1p());
    let logs: Vec<f64> = (0..d)
        .map(|i| lb[i] + i as f64 * le + (n - i) as f64 * l1e)
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s = kahan_sum(logs.iter().map(|l| (l - top).exp()));
    Ok((top.exp() * s).clamp(0.0, 1.0))
}

/// Inverse of [`apriori_delta`] in `ε`, by bisection.
pub fn apriori_epsilon(n: usize, k: usize, delta: f64) -> Result<f64> {
    check_apriori(n, k)?;
    ensure(delta > 0.0 && delta < 1.0, || format!("delta must lie in (0,1), got {delta}"))?;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if apriori_delta(n, k, mid)? > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosterioriBounds {
    pub eps_lower: f64,
    pub eps_upper: f64,
    pub t_small: f64,
    pub t_large: f64,
}

/// The root equation `C(N,m)t^{N−m} = S(t)` rewritten as `h(s) = 0` with `t = eʰ`:
/// `h(s) = ln C(N,m) − ln Σ_i c_i e^{(i−N)s}`, which is concave in `s`.
struct RootEquation {
    lead: f64,
    /// `(ln c_i, exponent i − N)` for every term of the right-hand side.
    terms: Vec<(f64, f64)>,
}

impl RootEquation {
    fn new(n: usize, m: usize, delta: f64) -> Self {
        // ln C(i, m) for i = m..=4N, built upward from C(m, m) = 1
        let mut lc = Vec::with_capacity(4 * n - m + 1);
        let mut acc = 0.0f64;
        lc.push(0.0);
        for i in (m + 1)..=(4 * n) {
            acc += (i as f64).ln() - ((i - m) as f64).ln();
            lc.push(acc);
        }
        let nf = n as f64;
        let (w_low, w_high) = ((delta / (2.0 * nf)).ln(), (delta / (6.0 * nf)).ln());
        let mut terms = Vec::with_capacity(3 * n + 1);
        for i in m..n {
            terms.push((w_low + lc[i - m], i as f64 - nf));
        }
        for i in (n + 1)..=(4 * n) {
            terms.push((w_high + lc[i - m], i as f64 - nf));
        }
        let lead = if m == n { 0.0 } else { lc_n(n, m) };
        RootEquation { lead, terms }
    }

    fn eval(&self, s: f64) -> f64 {
        let top = self
            .terms
            .iter()
            .map(|&(lw, e)| lw + e * s)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = self.terms.iter().map(|&(lw, e)| (lw + e * s - top).exp()).sum();
        self.lead - (top + sum.ln())
    }

    /// Weighted mean exponent of the right-hand side; `h'(s)` is its negative.
    fn mean_exponent(&self, s: f64) -> f64 {
        let top = self
            .terms
            .iter()
            .map(|&(lw, e)| lw + e * s)
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for &(lw, e) in &self.terms {
            let w = (lw + e * s - top).exp();
            num += w * e;
            den += w;
        }
        num / den
    }
}

fn lc_n(n: usize, m: usize) -> f64 {
    log_binomials(n, m)[m]
}

const S_MIN: f64 = -745.0;
const T_CAP: f64 = 1e6;

/// Bisects `h` on `[lo, hi]` where `h(lo)` and `h(hi)` have opposite signs.
fn bisect(eq: &RootEquation, mut lo: f64, mut hi: f64) -> f64 {
    let rising = eq.eval(lo) < 0.0;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (eq.eval(mid) < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-root violation interval for complexity `m` out of `N` samples at confidence `1 − δ`.
pub fn posteriori_bounds(n: usize, m: usize, delta: f64) -> Result<PosterioriBounds> {
    ensure(n >= 1, || "posteriori bounds need N ≥ 1".into())?;
    ensure(m <= n, || format!("complexity {m} exceeds N={n}"))?;
    ensure(delta > 0.0 && delta < 1.0, || format!("delta must lie in (0,1), got {delta}"))?;
    let eq = RootEquation::new(n, m, delta);
    let s_cap = T_CAP.ln();
    let fail = |what: &str| Error::NumericalFailure(format!("root bracketing failed ({what}) for N={n}, m={m}"));

    let (t_small, t_large) = if m == n {
        // h is decreasing: 1 − S(t) with t_small fixed at 0
        if eq.eval(S_MIN) <= 0.0 || eq.eval(s_cap) >= 0.0 {
            return Err(fail("single root"));
        }
        (0.0, bisect(&eq, S_MIN, s_cap).exp())
    } else {
        let (mut lo, mut hi) = (S_MIN, s_cap);
        if eq.mean_exponent(lo) >= 0.0 || eq.mean_exponent(hi) <= 0.0 {
            return Err(fail("peak"));
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if eq.mean_exponent(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let peak = 0.5 * (lo + hi);
        if eq.eval(peak) <= 0.0 || eq.eval(S_MIN) >= 0.0 || eq.eval(s_cap) >= 0.0 {
            return Err(fail("two roots"));
        }
        (bisect(&eq, S_MIN, peak).exp(), bisect(&eq, peak, s_cap).exp())
    };
    let eps_upper = (1.0 - t_small).clamp(0.0, 1.0);
    let eps_lower = (1.0 - t_large).clamp(0.0, 1.0);
    if eps_lower > eps_upper {
        return Err(Error::NumericalFailure(format!(
            "bounds out of order: {eps_lower} > {eps_upper}"
        )));
    }
    Ok(PosterioriBounds {
        eps_lower,
        eps_upper,
        t_small,
        t_large,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroBound {
    pub bound: f64,
    pub addend: f64,
    pub vacuous: bool,
}

/// `min(1, ε̄ + μ/R)`.
pub fn dro_bound(eps_upper: f64, amb: &AmbiguitySpec) -> Result<DroBound> {
    amb.validate()?;
    ensure((0.0..=1.0).contains(&eps_upper), || format!("eps_upper must lie in [0,1], got {eps_upper}"))?;
    let addend = amb.addend();
    let raw = eps_upper + addend;
    Ok(DroBound {
        bound: raw.min(1.0),
        addend,
        vacuous: raw > 1.0,
    })
}
