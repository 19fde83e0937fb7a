//! Per-station packet sources and queues.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{invalid, Result};

/// Buffer size used for unsaturated stations.
pub const QUEUE_CAPACITY: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrafficModel {
    /// A packet is always waiting.
    Saturated,
    /// Poisson arrivals at `rate` packets per second into a finite buffer.
    Poisson { rate: f64, capacity: usize },
}

impl TrafficModel {
    pub fn poisson(rate: f64) -> Self {
        TrafficModel::Poisson { rate, capacity: QUEUE_CAPACITY }
    }

    pub fn validate(&self) -> Result<()> {
        if let TrafficModel::Poisson { rate, capacity } = *self {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(invalid("arrival_rate", rate, "must be finite and non-negative"));
            }
            if capacity == 0 {
                return Err(invalid("queue_capacity", capacity, "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Queue of one station. Times are in microseconds.
#[derive(Clone, Debug)]
pub struct PacketQueue {
    model: TrafficModel,
    arrivals: VecDeque<f64>,
    next_arrival: f64,
    gap: Option<Exp<f64>>,
    /// When the current head-of-line packet got there.
    head_since: f64,
    dropped_full: u64,
}

impl PacketQueue {
    pub fn new<R: Rng + ?Sized>(model: TrafficModel, now: f64, rng: &mut R) -> Self {
        let gap = match model {
            TrafficModel::Poisson { rate, .. } if rate > 0.0 => Some(Exp::new(rate * 1e-6).expect("positive rate")),
            _ => None,
        };
        let next_arrival = gap.map_or(f64::INFINITY, |g| now + g.sample(rng));
        Self { model, arrivals: VecDeque::new(), next_arrival, gap, head_since: now, dropped_full: 0 }
    }

    pub fn has_packet(&self) -> bool {
        matches!(self.model, TrafficModel::Saturated) || !self.arrivals.is_empty()
    }

    pub fn len(&self) -> usize {
        match self.model {
            TrafficModel::Saturated => usize::MAX,
            _ => self.arrivals.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.has_packet()
    }

    pub fn head_since(&self) -> f64 {
        self.head_since
    }

    /// Arrival time of the head packet (the head-of-line time for saturated
    /// stations).
    pub fn head_arrival(&self) -> f64 {
        self.arrivals.front().copied().unwrap_or(self.head_since)
    }

    /// Packets lost to a full buffer.
    pub fn overflow_drops(&self) -> u64 {
        self.dropped_full
    }

    /// Admits every arrival up to `now`.
    pub fn arrive_until<R: Rng + ?Sized>(&mut self, now: f64, rng: &mut R) {
        let (Some(gap), TrafficModel::Poisson { capacity, .. }) = (self.gap, self.model) else {
            return;
        };
        while self.next_arrival <= now {
            let t = self.next_arrival;
            if self.arrivals.len() < capacity {
                if self.arrivals.is_empty() {
                    // A packet that arrives while its predecessor is still on
                    // the air reaches the head when that one completes.
                    self.head_since = t.max(self.head_since);
                }
                self.arrivals.push_back(t);
            } else {
                self.dropped_full += 1;
            }
            self.next_arrival = t + gap.sample(rng);
        }
    }

    /// Removes up to `count` head packets at time `now`; their arrival times
    /// replace the contents of `out`.
    pub fn pop(&mut self, count: usize, now: f64, out: &mut Vec<f64>) {
        out.clear();
        match self.model {
            TrafficModel::Saturated => out.resize(count, self.head_since),
            _ => {
                let k = count.min(self.arrivals.len());
                out.extend(self.arrivals.drain(..k));
            }
        }
        self.head_since = match self.arrivals.front() {
            Some(&t) => t.max(now),
            None => now,
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn saturated_always_has_packet() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut q = PacketQueue::new(TrafficModel::Saturated, 0.0, &mut rng);
        assert!(q.has_packet());
        let mut out = Vec::new();
        q.pop(3, 100.0, &mut out);
        assert_eq!(out, vec![0.0; 3]);
        assert_eq!(q.head_since(), 100.0);
        assert!(q.has_packet());
    }

    #[test]
    fn zero_rate_never_fills() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut q = PacketQueue::new(TrafficModel::poisson(0.0), 0.0, &mut rng);
        q.arrive_until(1e12, &mut rng);
        assert!(!q.has_packet());
    }

    #[test]
    fn capacity_and_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut q = PacketQueue::new(TrafficModel::poisson(1000.0), 0.0, &mut rng);
        q.arrive_until(10e6, &mut rng);
        assert_eq!(q.len(), QUEUE_CAPACITY);
        let total = q.len() as f64 + q.overflow_drops() as f64;
        // 10 s at 1000/s: 10^4 arrivals, sd 100.
        assert!((total - 1e4).abs() < 400.0, "{total}");
    }

    #[test]
    fn head_of_line_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut q = PacketQueue::new(TrafficModel::poisson(100.0), 0.0, &mut rng);
        q.arrive_until(1e6, &mut rng);
        let first = q.head_arrival();
        assert_eq!(q.head_since(), first);
        let n = q.len();
        let mut popped = Vec::new();
        q.pop(1, 2e6, &mut popped);
        assert_eq!(popped, vec![first]);
        if n > 1 {
            assert_eq!(q.head_since(), 2e6);
        }
    }

    #[test]
    fn validation() {
        assert!(TrafficModel::poisson(-1.0).validate().is_err());
        assert!(TrafficModel::Poisson { rate: 1.0, capacity: 0 }.validate().is_err());
        assert!(TrafficModel::Saturated.validate().is_ok());
    }
}
