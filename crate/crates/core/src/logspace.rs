//! Natural-log probabilities.
//!
//! Tail bounds at the security levels of interest are products like
//! `exp(-3200)`, which underflow `f64`. Every bound in this crate is carried
//! as its logarithm and only converted to a linear value at the boundary.

#[allow(unused_imports)]
use num_traits::Float;

/// A probability (or probability bound) stored as its natural logarithm.
///
/// Bounds may exceed one, in which case they are vacuous; [`LogProb::linear`]
/// clamps such values to one.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogProb(f64);

impl LogProb {
    pub const ONE: LogProb = LogProb(0.0);
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);

    pub fn from_ln(ln: f64) -> Self {
        LogProb(ln)
    }

    pub fn from_linear(p: f64) -> Self {
        LogProb(p.ln())
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    /// Linear value clamped to `[0, 1]`.
    pub fn linear(self) -> f64 {
        if self.0 >= 0.0 {
            1.0
        } else {
            self.0.exp()
        }
    }

    /// True when the bound carries no information (value >= 1).
    pub fn is_vacuous(self) -> bool {
        self.0 >= 0.0
    }

    pub fn scale(self, factor: f64) -> Self {
        LogProb(self.0 + factor.ln())
    }
}

/// `ln(exp(a) + exp(b))` without overflow or underflow.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum_i exp(x_i))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if hi == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - hi).exp()).sum();
    hi + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_direct_sum_in_safe_range() {
        let xs = [-1.0, 0.5, -3.0];
        let direct: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-14);
    }

    #[test]
    fn lse_survives_huge_negative_exponents() {
        let v = log_sum_exp(&[-3200.0, -3200.0]);
        assert!((v - (-3200.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(ln_add_exp(f64::NEG_INFINITY, -5.0), -5.0);
    }

    #[test]
    fn linear_is_clamped() {
        assert_eq!(LogProb::from_ln(3.0).linear(), 1.0);
        assert!(LogProb::from_ln(3.0).is_vacuous());
        assert_eq!(LogProb::ZERO.linear(), 0.0);
        assert!((LogProb::from_linear(0.25).linear() - 0.25).abs() < 1e-15);
    }
}
