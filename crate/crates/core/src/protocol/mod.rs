//! Per-station slot selection rules.

mod dcf;
mod lbeb;
mod lmac;
mod lzc;

pub use dcf::{Dcf, CW_MAX, CW_MIN, RETRY_LIMIT};
pub use lbeb::Lbeb;
pub use lmac::{lmac_select, lmac_update, Lmac};
pub use lzc::{lzc_distribution, zc_distribution, Lzc, StayRule};

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{invalid, Error, Result};

/// What a station learned about its own transmission (real or virtual).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OwnOutcome {
    Success,
    Failure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    Dcf,
    Lbeb,
    Zc,
    Lzc,
    Lmac,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 5] = [Self::Dcf, Self::Lbeb, Self::Zc, Self::Lzc, Self::Lmac];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dcf => "dcf",
            Self::Lbeb => "lbeb",
            Self::Zc => "zc",
            Self::Lzc => "lzc",
            Self::Lmac => "lmac",
        }
    }

    /// True for the protocols that keep a slot in a repeating schedule.
    pub fn is_scheduled(self) -> bool {
        self != Self::Dcf
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Parse(format!("unknown protocol `{s}` (expected dcf, lbeb, zc, lzc or lmac)")))
    }
}

/// Stay probability used by L-ZC.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gamma {
    Fixed(f64),
    /// `1 / (C - N + 2)`, clamped to `1/2` once `N >= C`.
    Auto,
}

impl Gamma {
    pub fn resolve(self, slots: usize, stations: usize) -> f64 {
        match self {
            Gamma::Fixed(g) => g,
            Gamma::Auto => auto_gamma(slots, stations),
        }
    }
}

pub fn auto_gamma(slots: usize, stations: usize) -> f64 {
    1.0 / (slots.saturating_sub(stations) + 2) as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolParams {
    pub beta: f64,
    pub gamma: Gamma,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self { beta: 0.95, gamma: Gamma::Auto }
    }
}

impl ProtocolParams {
    pub fn validate(&self, kind: ProtocolKind) -> Result<()> {
        if kind == ProtocolKind::Lmac && !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(invalid("beta", self.beta, "must lie in (0,1)"));
        }
        if let (ProtocolKind::Lzc, Gamma::Fixed(g)) = (kind, self.gamma) {
            if !(g > 0.0 && g < 1.0) {
                return Err(invalid("gamma", g, "must lie in (0,1)"));
            }
        }
        Ok(())
    }
}

/// Interface the slot engine uses for every schedule-based protocol.
pub trait ScheduleLearner {
    /// Slot in `1..=schedule_len()` used in the current schedule.
    fn current_slot(&self) -> usize;

    fn schedule_len(&self) -> usize;

    /// Applies the end-of-schedule update and returns the slot for the next
    /// schedule. `idle` lists the 1-based positions seen idle in the schedule
    /// that just finished.
    fn on_schedule_end<R: Rng + ?Sized>(&mut self, outcome: OwnOutcome, idle: &[usize], rng: &mut R) -> usize;

    /// Moves to a new schedule length; the slot index is folded into range.
    fn resize(&mut self, len: usize);
}

/// Any of the schedule-based learners.
#[derive(Clone, Debug, PartialEq)]
pub enum Learner {
    Lbeb(Lbeb),
    Lzc(Lzc),
    Lmac(Lmac),
}

impl Learner {
    pub fn kind(&self) -> ProtocolKind {
        match self {
            Learner::Lbeb(_) => ProtocolKind::Lbeb,
            Learner::Lzc(l) if l.rule() == StayRule::Uniform => ProtocolKind::Zc,
            Learner::Lzc(_) => ProtocolKind::Lzc,
            Learner::Lmac(_) => ProtocolKind::Lmac,
        }
    }

    pub fn as_lmac(&self) -> Option<&Lmac> {
        match self {
            Learner::Lmac(l) => Some(l),
            _ => None,
        }
    }
}

impl ScheduleLearner for Learner {
    fn current_slot(&self) -> usize {
        match self {
            Learner::Lbeb(l) => l.current_slot(),
            Learner::Lzc(l) => l.current_slot(),
            Learner::Lmac(l) => l.current_slot(),
        }
    }

    fn schedule_len(&self) -> usize {
        match self {
            Learner::Lbeb(l) => l.schedule_len(),
            Learner::Lzc(l) => l.schedule_len(),
            Learner::Lmac(l) => l.schedule_len(),
        }
    }

    fn on_schedule_end<R: Rng + ?Sized>(&mut self, outcome: OwnOutcome, idle: &[usize], rng: &mut R) -> usize {
        match self {
            Learner::Lbeb(l) => l.on_schedule_end(outcome, idle, rng),
            Learner::Lzc(l) => l.on_schedule_end(outcome, idle, rng),
            Learner::Lmac(l) => l.on_schedule_end(outcome, idle, rng),
        }
    }

    fn resize(&mut self, len: usize) {
        match self {
            Learner::Lbeb(l) => l.resize(len),
            Learner::Lzc(l) => l.resize(len),
            Learner::Lmac(l) => l.resize(len),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Protocol {
    Dcf(Dcf),
    Scheduled(Learner),
}

impl Protocol {
    pub fn kind(&self) -> ProtocolKind {
        match self {
            Protocol::Dcf(_) => ProtocolKind::Dcf,
            Protocol::Scheduled(l) => l.kind(),
        }
    }
}

/// Fresh protocol state for one station. `stations` is only consulted when
/// L-ZC derives its stay probability automatically.
pub fn init_protocol<R: Rng + ?Sized>(
    kind: ProtocolKind,
    slots: usize,
    stations: usize,
    params: &ProtocolParams,
    rng: &mut R,
) -> Result<Protocol> {
    params.validate(kind)?;
    if kind.is_scheduled() && slots == 0 {
        return Err(invalid("schedule_len", slots, "must be at least 1"));
    }
    Ok(match kind {
        ProtocolKind::Dcf => Protocol::Dcf(Dcf::new()),
        ProtocolKind::Lbeb => Protocol::Scheduled(Learner::Lbeb(Lbeb::new(slots, rng))),
        ProtocolKind::Zc => Protocol::Scheduled(Learner::Lzc(Lzc::new(slots, StayRule::Uniform, rng))),
        ProtocolKind::Lzc => {
            let rule = match params.gamma {
                Gamma::Fixed(g) => StayRule::Fixed(g),
                Gamma::Auto => StayRule::Auto { stations },
            };
            Protocol::Scheduled(Learner::Lzc(Lzc::new(slots, rule, rng)))
        }
        ProtocolKind::Lmac => Protocol::Scheduled(Learner::Lmac(Lmac::new(slots.max(2), params.beta, rng)?)),
    })
}

/// Backoff that moves a station from slot `s_n` of one schedule to slot
/// `s_next` of the following one.
pub fn backoff_from_slots(s_n: usize, s_next: usize, slots: usize) -> Result<usize> {
    for (name, s) in [("s_n", s_n), ("s_next", s_next)] {
        if s == 0 || s > slots {
            return Err(invalid(name, s, "slot must lie in 1..=C"));
        }
    }
    Ok(slots - s_n + s_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn backoff_examples() {
        assert_eq!(backoff_from_slots(3, 5, 8).unwrap(), 10);
        assert_eq!(backoff_from_slots(7, 7, 16).unwrap(), 16);
        assert_eq!(backoff_from_slots(16, 1, 16).unwrap(), 1);
        assert_eq!(backoff_from_slots(1, 16, 16).unwrap(), 31);
        assert!(backoff_from_slots(0, 1, 16).is_err());
        assert!(backoff_from_slots(1, 17, 16).is_err());
    }

    #[test]
    fn kind_round_trip() {
        for k in ProtocolKind::ALL {
            assert_eq!(k.name().parse::<ProtocolKind>().unwrap(), k);
        }
        assert_eq!("L-MAC".parse::<ProtocolKind>().unwrap(), ProtocolKind::Lmac);
        assert!("aloha".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn init_checks_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad_beta = ProtocolParams { beta: 1.0, ..Default::default() };
        assert!(init_protocol(ProtocolKind::Lmac, 16, 4, &bad_beta, &mut rng).is_err());
        let bad_gamma = ProtocolParams { gamma: Gamma::Fixed(0.0), ..Default::default() };
        assert!(init_protocol(ProtocolKind::Lzc, 16, 4, &bad_gamma, &mut rng).is_err());
        // Out-of-range beta is irrelevant to protocols that do not use it.
        assert!(init_protocol(ProtocolKind::Lbeb, 16, 4, &bad_beta, &mut rng).is_ok());
        match init_protocol(ProtocolKind::Dcf, 16, 4, &ProtocolParams::default(), &mut rng).unwrap() {
            Protocol::Dcf(d) => assert_eq!(d.cw(), 32),
            other => panic!("{other:?}"),
        }
        match init_protocol(ProtocolKind::Lmac, 16, 4, &ProtocolParams::default(), &mut rng).unwrap() {
            Protocol::Scheduled(Learner::Lmac(l)) => assert!(l.probabilities().iter().all(|&p| p == 1.0 / 16.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn initial_slot_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 100_000;
        for kind in [ProtocolKind::Lzc, ProtocolKind::Zc, ProtocolKind::Lbeb, ProtocolKind::Lmac] {
            let mut counts = [0usize; 16];
            for _ in 0..draws {
                let Protocol::Scheduled(l) = init_protocol(kind, 16, 8, &ProtocolParams::default(), &mut rng).unwrap()
                else {
                    unreachable!()
                };
                counts[l.current_slot() - 1] += 1;
            }
            let p = 1.0 / 16.0;
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            for c in counts {
                assert!((c as f64 / draws as f64 - p).abs() < 3.0 * sd, "{kind}: {counts:?}");
            }
        }
    }

    #[test]
    fn auto_gamma_clamps() {
        assert_eq!(auto_gamma(16, 14), 0.25);
        assert_eq!(auto_gamma(16, 16), 0.5);
        assert_eq!(auto_gamma(16, 20), 0.5);
        assert_eq!(Gamma::Fixed(0.3).resolve(16, 20), 0.3);
    }
}
