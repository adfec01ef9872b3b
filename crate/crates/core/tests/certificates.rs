use num::{BigInt, BigRational, One, Signed, Zero};
use proptest::prelude::*;
use vess_core::certificates::{apriori_delta, apriori_epsilon, posteriori_bounds};

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn binom(n: u64, k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn pow(t: &BigRational, e: u64) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= t;
    }
    acc
}

/// Exact value of the two-root polynomial at `t`.
fn poly(n: u64, m: u64, delta: &BigRational, t: &BigRational) -> BigRational {
    let nn = BigRational::from_integer(BigInt::from(n));
    let two = BigRational::from_integer(BigInt::from(2));
    let six = BigRational::from_integer(BigInt::from(6));
    let mut val = if m < n {
        BigRational::from_integer(binom(n, m)) * pow(t, n - m)
    } else {
        BigRational::one()
    };
    let mut low = BigRational::zero();
    for i in m..n {
        low += BigRational::from_integer(binom(i, m)) * pow(t, i - m);
    }
    let mut high = BigRational::zero();
    for i in (n + 1)..=(4 * n) {
        high += BigRational::from_integer(binom(i, m)) * pow(t, i - m);
    }
    val -= delta / (two * &nn) * low;
    val -= delta / (six * &nn) * high;
    val
}

fn apriori_exact(n: u64, k: u64, eps: &BigRational) -> BigRational {
    let one = BigRational::one();
    (0..2 * k)
        .map(|i| BigRational::from_integer(binom(n, i)) * pow(eps, i) * pow(&(&one - eps), n - i))
        .fold(BigRational::zero(), |a, b| a + b)
}

#[test]
fn apriori_matches_exact_rational_sum() {
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let exact = apriori_exact(10, 1, &half);
    assert_eq!(exact, BigRational::new(BigInt::from(11), BigInt::from(1024)));
    assert!((apriori_delta(10, 1, 0.5).unwrap() - 11.0 / 1024.0).abs() <= 1e-12);

    for &(n, k, eps) in &[(50u64, 3u64, 0.1f64), (120, 5, 0.03), (30, 2, 0.4)] {
        let want = apriori_exact(n, k, &rat(eps));
        let got = rat(apriori_delta(n as usize, k as usize, eps).unwrap());
        let rel = ((&got - &want) / &want).abs();
        assert!(rel < rat(1e-12), "N={n} K={k} eps={eps}");
    }
}

#[test]
fn apriori_round_trip_at_large_n() {
    let eps = apriori_epsilon(1000, 12, 1e-5).unwrap();
    let back = apriori_delta(1000, 12, eps).unwrap();
    assert!((back - 1e-5).abs() <= 1e-10, "{back}");
}

#[test]
fn posteriori_roots_change_sign_exactly() {
    let delta = BigRational::new(BigInt::from(1), BigInt::from(20));
    let n = 30u64;
    for m in [0u64, 1, 4, 12, 29, 30] {
        let b = posteriori_bounds(n as usize, m as usize, 0.05).unwrap();
        let h = rat(1e-7);
        if m < n {
            let ts = rat(b.t_small);
            assert!(poly(n, m, &delta, &(&ts - &h)).is_negative(), "m={m} below t_small");
            assert!(poly(n, m, &delta, &(&ts + &h)).is_positive(), "m={m} above t_small");
        }
        let tl = rat(b.t_large);
        assert!(poly(n, m, &delta, &(&tl - &h)).is_positive(), "m={m} below t_large");
        assert!(poly(n, m, &delta, &(&tl + &h)).is_negative(), "m={m} above t_large");
    }
}

#[test]
fn posteriori_monotone_in_complexity() {
    let mut prev = (0.0, 0.0);
    for m in 0..=100 {
        let b = posteriori_bounds(100, m, 0.05).unwrap();
        assert!(b.eps_lower <= b.eps_upper, "m={m}");
        assert!(b.eps_upper >= prev.1, "upper drops at m={m}");
        assert!(b.eps_lower >= prev.0, "lower drops at m={m}");
        prev = (b.eps_lower, b.eps_upper);
    }
}

#[test]
fn posteriori_zero_complexity_beats_apriori() {
    for &n in &[200usize, 500, 1000, 2000] {
        for &delta in &[1e-5, 1e-3, 0.05] {
            for &k in &[2usize, 6, 12] {
                let post = posteriori_bounds(n, 0, delta).unwrap().eps_upper;
                let prior = apriori_epsilon(n, k, delta).unwrap();
                assert!(post <= prior, "N={n} delta={delta} K={k}: {post} > {prior}");
            }
        }
    }
}

proptest! {
    #[test]
    fn apriori_decreasing_in_eps(n in 30usize..400, k in 1usize..6, a in 0.001f64..0.99, b in 0.001f64..0.99) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(n > 2 * k);
        let dlo = apriori_delta(n, k, lo).unwrap();
        let dhi = apriori_delta(n, k, hi).unwrap();
        prop_assert!(dhi <= dlo);
    }

    #[test]
    fn apriori_decreasing_in_n(n in 30usize..400, k in 1usize..6, eps in 0.01f64..0.5) {
        let d1 = apriori_delta(n, k, eps).unwrap();
        let d2 = apriori_delta(n + 1, k, eps).unwrap();
        prop_assert!(d2 <= d1);
    }

    #[test]
    fn posteriori_bounds_are_an_interval(n in 5usize..300, frac in 0.0f64..1.0, delta in 1e-6f64..0.5) {
        let m = ((n as f64) * frac) as usize;
        let b = posteriori_bounds(n, m, delta).unwrap();
        prop_assert!(0.0 <= b.eps_lower && b.eps_lower <= b.eps_upper && b.eps_upper <= 1.0);
    }
}
