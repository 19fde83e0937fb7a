//! Scalar abstraction shared by the analytical code.
//!
//! Everything that only needs field arithmetic (transition probabilities,
//! linear solves, throughput formulas, the L-MAC update) is written against
//! [`Scalar`], so the same code runs over `f32`, `f64` and exact
//! [`BigRational`](num_rational::BigRational). Code that needs square roots
//! or iteration to a tolerance uses [`num_traits::Float`] instead.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

use crate::error::{Error, Result};

/// Ordered field element usable by the analytical code.
pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive {
    fn from_count(n: u128) -> Self {
        let lo = (n & u128::from(u64::MAX)) as u64;
        let hi = (n >> 64) as u64;
        let lo = Self::from_u64(lo).expect("u64 representable");
        if hi == 0 {
            return lo;
        }
        let two32 = Self::from_u64(1 << 32).expect("u64 representable");
        let hi = Self::from_u64(hi).expect("u64 representable");
        hi * two32.clone() * two32 + lo
    }

    fn from_len(n: usize) -> Self {
        Self::from_count(n as u128)
    }

    /// `num / den` computed in the field.
    fn ratio(num: u64, den: u64) -> Self {
        Self::from_count(u128::from(num)) / Self::from_count(u128::from(den))
    }

    /// Best-effort conversion from a float literal. Exact for dyadic values in
    /// rational types.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite float")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive {}

pub(crate) fn powi<T: Scalar>(base: &T, exp: usize) -> T {
    num_traits::pow(base.clone(), exp)
}

/// Binomial coefficient.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

/// Falling factorial `n (n-1) ... (n-k+1)`; zero when `k > n`.
pub fn falling(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    (0..k).try_fold(1u128, |acc, i| acc.checked_mul(u128::from(n - i)).ok_or(Error::Overflow))
}

/// Multinomial coefficient `(sum parts)! / prod(part!)`.
pub fn multinomial(parts: &[u32]) -> Result<u128> {
    let mut total: u64 = 0;
    let mut acc: u128 = 1;
    for &p in parts {
        for i in 1..=u64::from(p) {
            total += 1;
            acc = acc.checked_mul(u128::from(total)).ok_or(Error::Overflow)? / u128::from(i);
        }
    }
    Ok(acc)
}

/// Product of factorials of the multiplicities of equal values in a sorted
/// slice: the number of permutations that leave the sequence unchanged.
pub fn symmetry_count(sorted: &[u32]) -> u128 {
    let mut acc: u128 = 1;
    let mut run = 0u128;
    for (i, v) in sorted.iter().enumerate() {
        if i > 0 && sorted[i - 1] == *v {
            run += 1;
        } else {
            run = 1;
        }
        acc *= run;
    }
    acc
}

pub(crate) fn checked_pow(base: u64, exp: u32) -> Result<u128> {
    u128::from(base).checked_pow(exp).ok_or(Error::Overflow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    #[test]
    fn counting_helpers() {
        assert_eq!(binomial(16, 8), 12870);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(falling(5, 2).unwrap(), 20);
        assert_eq!(falling(2, 3).unwrap(), 0);
        assert_eq!(falling(7, 0).unwrap(), 1);
        assert_eq!(multinomial(&[2, 2]).unwrap(), 6);
        assert_eq!(multinomial(&[2, 3]).unwrap(), 10);
        assert_eq!(multinomial(&[]).unwrap(), 1);
        assert_eq!(symmetry_count(&[2, 2, 3]), 2);
        assert_eq!(symmetry_count(&[2, 2, 2]), 6);
        assert_eq!(symmetry_count(&[2, 3, 4]), 1);
    }

    #[test]
    fn large_counts_survive_conversion() {
        let n: u128 = 16u128.pow(16) + 7;
        let exact = BigRational::from_count(n);
        assert_eq!(exact.to_string(), n.to_string());
        let approx = f64::from_count(n);
        assert!((approx - n as f64).abs() <= 1.0);
    }

    #[test]
    fn ratio_is_exact_for_rationals() {
        let r = BigRational::ratio(7, 24);
        assert_eq!(r.to_string(), "7/24");
    }
}
