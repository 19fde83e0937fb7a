use rand::Rng;

use super::{auto_gamma, OwnOutcome, ScheduleLearner};

/// How an L-ZC station decides to keep its slot after a failure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StayRule {
    /// Constant stay probability.
    Fixed(f64),
    /// `1/(C - N + 2)` for the current schedule length.
    Auto { stations: usize },
    /// `1/(n_i + 1)`: plain ZC, every candidate equally likely.
    Uniform,
}

impl StayRule {
    fn stay_probability(self, slots: usize, idle: usize) -> f64 {
        match self {
            StayRule::Fixed(g) => g,
            StayRule::Auto { stations } => auto_gamma(slots, stations),
            StayRule::Uniform => 1.0 / (idle + 1) as f64,
        }
    }
}

/// Next-slot distribution of L-ZC after a schedule, as `(slot, probability)`.
pub fn lzc_distribution(slot: usize, outcome: OwnOutcome, idle: &[usize], gamma: f64) -> Vec<(usize, f64)> {
    if outcome == OwnOutcome::Success || idle.is_empty() {
        return vec![(slot, 1.0)];
    }
    let each = (1.0 - gamma) / idle.len() as f64;
    let mut out = vec![(slot, gamma)];
    out.extend(idle.iter().map(|&j| (j, each)));
    out
}

/// Next-slot distribution of ZC: the failed slot and every idle slot equally.
pub fn zc_distribution(slot: usize, outcome: OwnOutcome, idle: &[usize]) -> Vec<(usize, f64)> {
    if outcome == OwnOutcome::Success {
        return vec![(slot, 1.0)];
    }
    let each = 1.0 / (idle.len() + 1) as f64;
    std::iter::once(slot).chain(idle.iter().copied()).map(|j| (j, each)).collect()
}

/// L-ZC (and, with [`StayRule::Uniform`], ZC) station state.
#[derive(Clone, Debug, PartialEq)]
pub struct Lzc {
    slot: usize,
    len: usize,
    rule: StayRule,
}

impl Lzc {
    pub fn new<R: Rng + ?Sized>(len: usize, rule: StayRule, rng: &mut R) -> Self {
        Self { slot: rng.random_range(1..=len), len, rule }
    }

    pub fn rule(&self) -> StayRule {
        self.rule
    }

    pub fn gamma(&self, idle: usize) -> f64 {
        self.rule.stay_probability(self.len, idle)
    }
}

impl ScheduleLearner for Lzc {
    fn current_slot(&self) -> usize {
        self.slot
    }

    fn schedule_len(&self) -> usize {
        self.len
    }

    fn on_schedule_end<R: Rng + ?Sized>(&mut self, outcome: OwnOutcome, idle: &[usize], rng: &mut R) -> usize {
        if outcome == OwnOutcome::Failure && !idle.is_empty() {
            let gamma = self.gamma(idle.len());
            if !rng.random_bool(gamma) {
                self.slot = idle[rng.random_range(0..idle.len())];
            }
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
    use std::collections::BTreeMap;

    fn empirical(l: &Lzc, outcome: OwnOutcome, idle: &[usize], draws: usize, seed: u64) -> BTreeMap<usize, f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = BTreeMap::new();
        for _ in 0..draws {
            let mut s = l.clone();
            *counts.entry(s.on_schedule_end(outcome, idle, &mut rng)).or_insert(0usize) += 1;
        }
        counts.into_iter().map(|(k, c)| (k, c as f64 / draws as f64)).collect()
    }

    fn at(slot: usize, len: usize, rule: StayRule) -> Lzc {
        Lzc { slot, len, rule }
    }

    #[test]
    fn success_keeps_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for rule in [StayRule::Fixed(0.3), StayRule::Uniform, StayRule::Auto { stations: 4 }] {
            let mut l = at(6, 16, rule);
            assert_eq!(l.on_schedule_end(OwnOutcome::Success, &[1, 2, 3], &mut rng), 6);
        }
    }

    #[test]
    fn failure_without_idle_slots_stays() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for rule in [StayRule::Fixed(0.3), StayRule::Uniform] {
            let mut l = at(6, 16, rule);
            for _ in 0..100 {
                assert_eq!(l.on_schedule_end(OwnOutcome::Failure, &[], &mut rng), 6);
            }
        }
    }

    #[test]
    fn sampled_failure_matches_distribution() {
        let draws = 100_000;
        let cases: [(StayRule, &[usize]); 2] = [(StayRule::Fixed(0.5), &[4, 7]), (StayRule::Uniform, &[1, 9, 12])];
        for (rule, idle) in cases {
            let l = at(2, 16, rule);
            let want = lzc_distribution(2, OwnOutcome::Failure, idle, l.gamma(idle.len()));
            let got = empirical(&l, OwnOutcome::Failure, idle, draws, 3);
            for (slot, p) in want {
                let sd = (p * (1.0 - p) / draws as f64).sqrt();
                let f = got.get(&slot).copied().unwrap_or(0.0);
                assert!((f - p).abs() < 3.0 * sd, "slot {slot}: {f} vs {p}");
            }
        }
    }

    #[test]
    fn zc_examples() {
        let d = zc_distribution(5, OwnOutcome::Failure, &[1, 2, 3]);
        assert_eq!(d.len(), 4);
        assert!(d.iter().all(|&(_, p)| p == 0.25));
        assert_eq!(zc_distribution(5, OwnOutcome::Failure, &[]), vec![(5, 1.0)]);
        assert_eq!(zc_distribution(5, OwnOutcome::Success, &[1]), vec![(5, 1.0)]);
    }

    #[test]
    fn zc_is_lzc_with_inverse_gamma() {
        // Every idle set of every schedule length up to 8, from every slot not
        // itself idle.
        for len in 1..=8usize {
            for mask in 0u32..(1 << len) {
                let idle: Vec<usize> = (1..=len).filter(|j| mask & (1 << (j - 1)) != 0).collect();
                for slot in (1..=len).filter(|s| !idle.contains(s)) {
                    for outcome in [OwnOutcome::Success, OwnOutcome::Failure] {
                        let zc = zc_distribution(slot, outcome, &idle);
                        let gamma = 1.0 / (idle.len() + 1) as f64;
                        let lzc = lzc_distribution(slot, outcome, &idle, gamma);
                        assert_eq!(zc.len(), lzc.len());
                        for ((a, p), (b, q)) in zc.iter().zip(&lzc) {
                            assert_eq!(a, b);
                            assert!((p - q).abs() < 1e-15);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn resize_folds_slot() {
        let mut l = at(13, 16, StayRule::Fixed(0.5));
        l.resize(8);
        assert_eq!((l.current_slot(), l.schedule_len()), (5, 8));
        l.resize(32);
        assert_eq!(l.current_slot(), 5);
        let mut l = at(16, 16, StayRule::Fixed(0.5));
        l.resize(8);
        assert_eq!(l.current_slot(), 8);
    }

    #[test]
    fn auto_rule_tracks_length() {
        let mut l = at(1, 16, StayRule::Auto { stations: 14 });
        assert_eq!(l.gamma(3), 0.25);
        l.resize(32);
        assert_eq!(l.gamma(3), 1.0 / 20.0);
    }
}
