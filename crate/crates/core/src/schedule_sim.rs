//! Synchronised, saturated, error-free simulation at schedule granularity.
//!
//! Every station shares the schedule phase, so one iteration is one schedule.
//! The slot engine reproduces these runs draw for draw when all stations
//! start together; this version skips per-slot bookkeeping and is used for
//! large Monte Carlo batches.

use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::protocol::{init_protocol, Learner, OwnOutcome, Protocol, ProtocolKind, ProtocolParams, ScheduleLearner};
use crate::seeding::station_rng;

pub struct ScheduleSim {
    learners: Vec<Learner>,
    rngs: Vec<ChaCha8Rng>,
    occupancy: Vec<u32>,
    idle: Vec<usize>,
    schedule: u64,
}

impl ScheduleSim {
    pub fn new(kind: ProtocolKind, params: &ProtocolParams, slots: usize, stations: usize, seed: u64) -> Result<Self> {
        if !kind.is_scheduled() {
            return Err(invalid("protocol", kind, "schedule-level runs need a schedule-based protocol"));
        }
        if stations == 0 || slots == 0 {
            return Err(invalid("stations", stations, "need at least one station and one slot"));
        }
        let mut rngs: Vec<ChaCha8Rng> = (0..stations).map(|j| station_rng(seed, j)).collect();
        let learners = rngs
            .iter_mut()
            .map(|rng| match init_protocol(kind, slots, stations, params, rng)? {
                Protocol::Scheduled(l) => Ok(l),
                Protocol::Dcf(_) => unreachable!("checked above"),
            })
            .collect::<Result<_>>()?;
        Ok(Self { learners, rngs, occupancy: vec![0; slots], idle: Vec::with_capacity(slots), schedule: 0 })
    }

    pub fn slots(&self) -> Vec<usize> {
        self.learners.iter().map(ScheduleLearner::current_slot).collect()
    }

    pub fn schedule(&self) -> u64 {
        self.schedule
    }

    pub fn learners(&self) -> &[Learner] {
        &self.learners
    }

    /// Counts occupancy of the current schedule. Returns true if it is
    /// collision-free.
    fn tally(&mut self) -> bool {
        self.occupancy.iter_mut().for_each(|c| *c = 0);
        for l in &self.learners {
            self.occupancy[l.current_slot() - 1] += 1;
        }
        self.occupancy.iter().all(|&c| c <= 1)
    }

    /// Plays the current schedule and applies every station's update.
    /// Returns the number of successful stations in the played schedule.
    pub fn advance(&mut self) -> usize {
        self.tally();
        self.idle.clear();
        self.idle.extend(self.occupancy.iter().enumerate().filter(|(_, c)| **c == 0).map(|(j, _)| j + 1));
        let mut successes = 0;
        for (l, rng) in self.learners.iter_mut().zip(&mut self.rngs) {
            let outcome = if self.occupancy[l.current_slot() - 1] == 1 {
                successes += 1;
                OwnOutcome::Success
            } else {
                OwnOutcome::Failure
            };
            l.on_schedule_end(outcome, &self.idle, rng);
        }
        self.schedule += 1;
        successes
    }

    /// Schedules played before the first collision-free one, or `None` if
    /// none occurs within `cap` schedules.
    pub fn run_to_convergence(&mut self, cap: u64) -> Option<u64> {
        while self.schedule < cap {
            if self.tally() {
                return Some(self.schedule);
            }
            self.advance();
        }
        None
    }
}

/// Convergence time in schedules of one seeded run.
pub fn convergence_schedules(
    kind: ProtocolKind,
    params: &ProtocolParams,
    slots: usize,
    stations: usize,
    seed: u64,
    cap: u64,
) -> Result<Option<u64>> {
    Ok(ScheduleSim::new(kind, params, slots, stations, seed)?.run_to_convergence(cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Gamma;

    #[test]
    fn single_station_is_converged_immediately() {
        for kind in [ProtocolKind::Lbeb, ProtocolKind::Zc, ProtocolKind::Lzc, ProtocolKind::Lmac] {
            assert_eq!(convergence_schedules(kind, &ProtocolParams::default(), 8, 1, 3, 10).unwrap(), Some(0));
        }
    }

    #[test]
    fn converged_state_is_absorbing() {
        let params = ProtocolParams { gamma: Gamma::Fixed(0.5), ..Default::default() };
        for seed in 0..50 {
            let mut sim = ScheduleSim::new(ProtocolKind::Lzc, &params, 16, 16, seed).unwrap();
            sim.run_to_convergence(100_000).unwrap();
            let slots = sim.slots();
            for _ in 0..20 {
                assert_eq!(sim.advance(), 16);
                assert_eq!(sim.slots(), slots);
            }
        }
    }

    #[test]
    fn two_stations_two_slots_mean() {
        // Schedule 0 collides with probability 1/2, after which each
        // schedule resolves with probability 1/2: E = 1/2 * 2 = 1.
        let params = ProtocolParams { gamma: Gamma::Fixed(0.5), ..Default::default() };
        let runs = 100_000u64;
        let total: u64 =
            (0..runs).map(|s| convergence_schedules(ProtocolKind::Lzc, &params, 2, 2, s, 1000).unwrap().unwrap()).sum();
        let mean = total as f64 / runs as f64;
        // Var = E[k^2] - 1 = 1/2 * (Var geom + 4) - 1 = 2.
        let se = (2.0 / runs as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn rejects_dcf() {
        assert!(ScheduleSim::new(ProtocolKind::Dcf, &ProtocolParams::default(), 8, 2, 0).is_err());
    }
}
