//! Elementary entropy functions and the exact Hamming-ball counter.

use num_bigint::BigUint;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A prime qudit dimension `d >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrimeDimension(usize);

impl PrimeDimension {
    pub fn new(d: usize) -> Result<Self> {
        if is_prime(d) {
            Ok(PrimeDimension(d))
        } else {
            Err(Error::NotPrime(d))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// `log2 d`, the maximal key rate per round.
    pub fn log2(self) -> f64 {
        self.as_f64().log2()
    }

    /// Number of `(basis, symbol)` pairs `(d+1)(d-1)` covered by the union bound.
    pub fn union_pairs(self) -> usize {
        (self.0 + 1) * (self.0 - 1)
    }
}

fn is_prime(d: usize) -> bool {
    if d < 2 {
        return false;
    }
    let mut k = 2;
    while k * k <= d {
        if d.is_multiple_of(k) {
            return false;
        }
        k += 1;
    }
    true
}

/// A real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Fraction01(f64);

impl Fraction01 {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Fraction01(value))
        } else {
            Err(Error::Domain {
                what: "fraction",
                value,
                domain: "[0, 1]",
            })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// The `d`-ary entropy `h_d(x) = x log_d(d-1) - x log_d x - (1-x) log_d(1-x)`.
///
/// Endpoints use `0 log 0 = 0`. The maximum `h_d((d-1)/d) = 1`.
pub fn d_ary_entropy(x: Fraction01, d: PrimeDimension) -> f64 {
    let x = x.get();
    let ln_d = d.as_f64().ln();
    let mut nats = 0.0;
    if x > 0.0 {
        nats += x * ((d.as_f64() - 1.0).ln() - x.ln());
    }
    if x < 1.0 {
        nats -= (1.0 - x) * (-x).ln_1p();
    }
    (nats / ln_d).clamp(0.0, 1.0)
}

/// `-log2(eps)` for `eps` in `(0, 1]`.
pub fn log2_of_inverse(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain {
            what: "eps",
            value: eps,
            domain: "(0, 1]",
        });
    }
    Ok(-eps.log2())
}

/// Largest word length handled by the exact counter.
pub const EXACT_BALL_LIMIT: usize = 40;

/// `log2 |{x in A_d^n : wt(x) <= k}| = log2 sum_{w<=k} C(n,w) (d-1)^w`, computed exactly.
pub fn hamming_ball_log_volume_exact(n: usize, k: usize, d: PrimeDimension) -> Result<f64> {
    if n > EXACT_BALL_LIMIT {
        return Err(Error::ExactRange {
            n,
            limit: EXACT_BALL_LIMIT,
        });
    }
    if k > n {
        return Err(Error::Precondition("hamming ball radius must not exceed n"));
    }
    let base = BigUint::from(d.get() - 1);
    let mut binom = BigUint::one();
    let mut power = BigUint::one();
    let mut total = BigUint::zero();
    for w in 0..=k {
        if w > 0 {
            binom = binom * BigUint::from(n - w + 1) / BigUint::from(w);
            power *= &base;
        }
        total += &binom * &power;
    }
    // total >= 1, and at most 13^40 < f64::MAX
    Ok(total.to_f64().unwrap_or(f64::INFINITY).log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(d: usize) -> PrimeDimension {
        PrimeDimension::new(d).unwrap()
    }

    fn h(x: f64, d: usize) -> f64 {
        d_ary_entropy(Fraction01::new(x).unwrap(), dim(d))
    }

    #[test]
    fn prime_dimension_rejects_composites() {
        for d in [0, 1, 4, 6, 9, 15, 49] {
            assert_eq!(PrimeDimension::new(d), Err(Error::NotPrime(d)));
        }
        for d in [2, 3, 5, 7, 11, 13, 101] {
            assert!(PrimeDimension::new(d).is_ok());
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(h(0.5, 2), 1.0);
        assert_eq!(h(0.0, 5), 0.0);
        assert!((h(2.0 / 3.0, 3) - 1.0).abs() < 1e-15);
        // mpmath, 30 digits: 0.546365217957574596...
        assert!((h(0.126, 2) - 0.546_365_217_957_574_6).abs() < 1e-14);
    }

    #[test]
    fn entropy_rejects_outside_unit_interval() {
        assert!(Fraction01::new(-1e-12).is_err());
        assert!(Fraction01::new(1.0 + 1e-12).is_err());
        assert!(Fraction01::new(f64::NAN).is_err());
    }

    #[test]
    fn entropy_endpoint_continuity() {
        for d in [2, 3, 5, 7] {
            assert!((h(0.0, d) - h(f64::EPSILON, d)).abs() < 1e-8);
            assert!((h(1.0, d) - h(1.0 - f64::EPSILON, d)).abs() < 1e-8);
        }
        assert_eq!(h(1.0, 2), 0.0);
    }

    #[test]
    fn entropy_concave_with_maximum_at_d_minus_one_over_d() {
        for d in [2, 3, 5, 7, 11] {
            let peak = (d as f64 - 1.0) / d as f64;
            assert!((h(peak, d) - 1.0).abs() < 1e-12);
            let grid: alloc::vec::Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
            let vals: alloc::vec::Vec<f64> = grid.iter().map(|&x| h(x, d)).collect();
            for w in vals.windows(3) {
                assert!(w[1] + 1e-12 >= 0.5 * (w[0] + w[2]), "not concave for d={d}");
            }
            for &v in &vals {
                assert!(v <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn log2_inverse_examples() {
        assert_eq!(log2_of_inverse(1.0).unwrap(), 0.0);
        assert_eq!(log2_of_inverse(0.5).unwrap(), 1.0);
        assert!((log2_of_inverse(1e-14).unwrap() - 46.506_993_328_423_07).abs() < 1e-10);
        assert!(log2_of_inverse(1e-300).unwrap().is_finite());
        assert!(log2_of_inverse(0.0).is_err());
        assert!(log2_of_inverse(1.5).is_err());
    }

    #[test]
    fn hamming_ball_examples() {
        assert_eq!(hamming_ball_log_volume_exact(5, 0, dim(3)).unwrap(), 0.0);
        assert!((hamming_ball_log_volume_exact(5, 5, dim(2)).unwrap() - 5.0).abs() < 1e-12);
        // 1 + 10*2 + 45*4 + 120*8 = 1161
        let v = hamming_ball_log_volume_exact(10, 3, dim(3)).unwrap();
        assert!((v - 1161f64.log2()).abs() < 1e-12);
        assert!(matches!(
            hamming_ball_log_volume_exact(41, 3, dim(2)),
            Err(Error::ExactRange { .. })
        ));
        assert!(hamming_ball_log_volume_exact(4, 5, dim(2)).is_err());
    }

    #[test]
    fn hamming_ball_whole_space_is_d_to_the_n() {
        for d in [2, 3, 5, 13] {
            let v = hamming_ball_log_volume_exact(40, 40, dim(d)).unwrap();
            assert!((v - 40.0 * (d as f64).log2()).abs() < 1e-9);
        }
    }
}
