use rand::Rng;

use super::{OwnOutcome, ScheduleLearner};

/// Learning BEB: keep the slot after a success, redraw uniformly after a failure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lbeb {
    slot: usize,
    len: usize,
}

impl Lbeb {
    pub fn new<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self { slot: rng.random_range(1..=len), len }
    }
}

impl ScheduleLearner for Lbeb {
    fn current_slot(&self) -> usize {
        self.slot
    }

    fn schedule_len(&self) -> usize {
        self.len
    }

    fn on_schedule_end<R: Rng + ?Sized>(&mut self, outcome: OwnOutcome, _idle: &[usize], rng: &mut R) -> usize {
        if outcome == OwnOutcome::Failure {
            self.slot = rng.random_range(1..=self.len);
        }
        self.slot
    }

    fn resize(&mut self, len: usize) {
        self.slot = (self.slot - 1) % len + 1;
        self.len = len;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn success_persists() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut l = Lbeb { slot: 5, len: 16 };
        assert_eq!(l.on_schedule_end(OwnOutcome::Success, &[], &mut rng), 5);
    }

    #[test]
    fn failure_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 100_000;
        let mut counts = [0usize; 16];
        for _ in 0..draws {
            let mut l = Lbeb { slot: 5, len: 16 };
            counts[l.on_schedule_end(OwnOutcome::Failure, &[], &mut rng) - 1] += 1;
        }
        let p = 1.0 / 16.0;
        let sd = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - p).abs() < 3.0 * sd, "{counts:?}");
        }
    }
}
