//! Exact binomial confidence limits.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Regularised incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * x.ln()
        + b * (-x).ln_1p();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

// modified Lentz evaluation
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let guard = |v: f64| if v.abs() < TINY { TINY } else { v };
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    1.0 - regularized_incomplete_beta(k as f64 + 1.0, (n - k) as f64, p)
}

/// One-sided Clopper–Pearson upper limit: the `p` with `P(X <= k; n, p) = 1 - level`.
pub fn clopper_pearson_upper(failures: u64, trials: u64, level: f64) -> Result<f64> {
    if trials == 0 || failures > trials {
        return Err(Error::Precondition("need 0 <= failures <= trials, trials > 0"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain {
            what: "confidence level",
            value: level,
            domain: "(0, 1)",
        });
    }
    if failures == trials {
        return Ok(1.0);
    }
    let alpha = 1.0 - level;
    if failures == 0 {
        return Ok(-((alpha.ln() / trials as f64).exp_m1()));
    }
    let (mut lo, mut hi) = (failures as f64 / trials as f64, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binomial_cdf(failures, trials, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incomplete_beta_known_values() {
        // I_x(1, 1) = x, I_x(a, 1) = x^a
        assert!((regularized_incomplete_beta(1.0, 1.0, 0.3) - 0.3).abs() < 1e-14);
        assert!((regularized_incomplete_beta(3.0, 1.0, 0.5) - 0.125).abs() < 1e-14);
        assert_eq!(regularized_incomplete_beta(2.0, 2.0, 0.0), 0.0);
        assert_eq!(regularized_incomplete_beta(2.0, 2.0, 1.0), 1.0);
    }

    #[test]
    fn binomial_cdf_matches_direct_summation() {
        let (n, p) = (30u64, 0.27f64);
        let mut acc = 0.0;
        let mut binom = 1.0f64;
        for k in 0..n {
            if k > 0 {
                binom *= (n - k + 1) as f64 / k as f64;
            }
            acc += binom * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
            assert!((binomial_cdf(k, n, p) - acc).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn upper_limit_zero_failures_closed_form() {
        let u = clopper_pearson_upper(0, 100_000, 0.99).unwrap();
        assert!((u - (1.0 - 0.01f64.powf(1e-5))).abs() < 1e-15);
        assert!((binomial_cdf(0, 100_000, u) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn upper_limit_inverts_cdf() {
        for (k, n) in [(1u64, 1000u64), (17, 1000), (500, 1000), (4_000, 100_000)] {
            let u = clopper_pearson_upper(k, n, 0.99).unwrap();
            assert!(u >= k as f64 / n as f64);
            assert!((binomial_cdf(k, n, u) - 0.01).abs() < 1e-9, "k={k}");
        }
        assert_eq!(clopper_pearson_upper(5, 5, 0.99).unwrap(), 1.0);
        assert!(clopper_pearson_upper(6, 5, 0.99).is_err());
        assert!(clopper_pearson_upper(1, 5, 1.0).is_err());
    }
}
