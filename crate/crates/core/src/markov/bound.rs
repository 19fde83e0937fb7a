use num_traits::Float;

use crate::error::{invalid, Result};

/// Lower bound on the probability that an L-MAC network becomes
/// collision-free within two schedules, from any state.
///
/// `K = ((1-beta)/(C-1))^N * (beta(1-beta)/(C-1))^N`, hence the convergence
/// time `tau` satisfies `P(tau >= 2n) <= (1-K)^n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmacBound<T> {
    pub k: T,
}

impl<T: Float> LmacBound<T> {
    /// Upper bound on `P(tau >= 2n)`.
    pub fn tail(&self, n: u32) -> T {
        (T::one() - self.k).powi(n as i32)
    }
}

pub fn lmac_bound<T: Float>(beta: T, slots: usize, stations: usize) -> Result<LmacBound<T>> {
    if !(beta > T::zero() && beta < T::one()) {
        return Err(invalid("beta", beta.to_f64().unwrap_or(f64::NAN), "must lie in (0,1)"));
    }
    if slots < 2 {
        return Err(invalid("slots", slots, "must be at least 2"));
    }
    if stations > slots {
        return Err(invalid("stations", stations, "must not exceed the schedule length"));
    }
    let spread = T::from(slots - 1).expect("small integer");
    let first = (T::one() - beta) / spread;
    let second = beta * (T::one() - beta) / spread;
    let n = stations as i32;
    Ok(LmacBound { k: first.powi(n) * second.powi(n) })
}
