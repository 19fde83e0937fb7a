use rand::Rng;

use super::{OwnOutcome, ScheduleLearner};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Learning update of the slot-preference vector after a schedule.
///
/// Success pins all mass on `slot`. Failure scales every entry by `beta` and
/// spreads the released mass `1 - beta` evenly over the other `C - 1` slots,
/// which keeps the vector summing to one.
pub fn lmac_update<T: Scalar>(p: &mut [T], slot: usize, beta: &T, outcome: OwnOutcome) {
    let s = slot - 1;
    match outcome {
        OwnOutcome::Success => {
            for (j, pj) in p.iter_mut().enumerate() {
                *pj = if j == s { T::one() } else { T::zero() };
            }
        }
        OwnOutcome::Failure => {
            let others = T::from_len(p.len() - 1);
            let share = (T::one() - beta.clone()) / others;
            for (j, pj) in p.iter_mut().enumerate() {
                let scaled = beta.clone() * pj.clone();
                *pj = if j == s { scaled } else { scaled + share.clone() };
            }
        }
    }
}

/// Draws a 1-based slot with probability proportional to `p`.
pub fn lmac_select<T: Scalar, R: Rng + ?Sized>(p: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let total: f64 = p.iter().map(Scalar::to_f64_lossy).sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, pj) in p.iter().enumerate() {
        let w = pj.to_f64_lossy();
        if w > 0.0 {
            last_positive = j;
        }
        acc += w;
        if target < acc {
            return j + 1;
        }
    }
    last_positive + 1
}

/// Per-station L-MAC state.
#[derive(Clone, Debug, PartialEq)]
pub struct Lmac<T = f64> {
    p: Vec<T>,
    slot: usize,
    beta: T,
}

impl<T: Scalar> Lmac<T> {
    /// Uniform preferences and a slot drawn from them.
    pub fn new<R: Rng + ?Sized>(len: usize, beta: T, rng: &mut R) -> Result<Self> {
        if beta <= T::zero() || beta >= T::one() {
            return Err(invalid("beta", format!("{beta:?}"), "must lie in (0,1)"));
        }
        if len < 2 {
            return Err(invalid("schedule_len", len, "L-MAC needs at least two slots"));
        }
        let p = vec![T::one() / T::from_len(len); len];
        let slot = lmac_select(&p, rng);
        Ok(Self { p, slot, beta })
    }

    pub fn probabilities(&self) -> &[T] {
        &self.p
    }

    pub fn beta(&self) -> &T {
        &self.beta
    }
}

impl ScheduleLearner for Lmac<f64> {
    fn current_slot(&self) -> usize {
        self.slot
    }

    fn schedule_len(&self) -> usize {
        self.p.len()
    }

    fn on_schedule_end<R: Rng + ?Sized>(&mut self, outcome: OwnOutcome, _idle: &[usize], rng: &mut R) -> usize {
        lmac_update(&mut self.p, self.slot, &self.beta, outcome);
        if outcome == OwnOutcome::Failure {
            self.slot = lmac_select(&self.p, rng);
        }
        self.slot
    }

    fn resize(&mut self, len: usize) {
        self.p = vec![1.0 / len as f64; len];
        self.slot = (self.slot - 1) % len + 1;
    }
}
