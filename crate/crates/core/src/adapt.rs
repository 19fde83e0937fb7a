//! Schedule-length control: the AP-announced rule, MIMD doubling/halving for
//! ZC-style stations, and checkpoint/probe control for L-MAC.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::protocol::{Learner, OwnOutcome, ScheduleLearner};

/// Largest multiple of the base length a station may reach: `2^10 * B`.
pub const MAX_DOUBLINGS: u32 = 10;
/// A-L-MAC probes a halved schedule once every this many checkpoints.
pub const PROBE_EVERY: usize = 10;

/// Access-point rule: grow when the schedule is full, shrink when two or more
/// slots went idle.
pub fn ap_adapt(len: usize, idle: usize) -> usize {
    match idle {
        0 => len + 1,
        1 => len,
        _ => len.saturating_sub(1).max(1),
    }
}

/// Packets sent per MAC slot by a station running at `len = 2^n * base`.
pub fn txop_packets(len: usize, base: usize) -> Result<u32> {
    if base == 0 || !len.is_multiple_of(base) || !(len / base).is_power_of_two() {
        return Err(invalid("schedule_len", len, "must be the base length times a power of two"));
    }
    Ok((len / base) as u32)
}

/// Per-station A-ZC / A-L-ZC state.
#[derive(Clone, Debug, PartialEq, Eq)]
#[allow(clippy::len_without_is_empty)]
pub struct AlzcState {
    len: usize,
    base: usize,
    /// Busy counts of the previous and the latest schedule at this length.
    busy: [Option<usize>; 2],
}

impl AlzcState {
    pub fn new(base: usize) -> Self {
        Self { len: base, base, busy: [None, None] }
    }

    pub fn with_len(base: usize, len: usize) -> Self {
        Self { len, base, busy: [None, None] }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Feeds one completed schedule (`idle` idle positions, the station's own
    /// slot counted busy) and returns the length for the next one.
    pub fn adapt(&mut self, idle: usize) -> usize {
        let busy = self.len - idle.min(self.len);
        self.busy = [self.busy[1], Some(busy)];
        let max = self.base << MAX_DOUBLINGS;
        let next = if idle == 0 {
            (self.len * 2).min(max)
        } else if 2 * idle >= self.len && self.busy[0] == self.busy[1] {
            (self.len / 2).max(self.base)
        } else {
            self.len
        };
        if next != self.len {
            self.len = next;
            self.busy = [None, None];
        }
        next
    }
}

/// Per-station A-L-MAC state.
#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::len_without_is_empty)]
pub struct AlmacState {
    len: usize,
    base: usize,
    probe_every: usize,
    since_check: usize,
    checkpoints: usize,
    /// Learner and length to fall back on while a halved schedule is probed.
    saved: Option<(Learner, usize)>,
}

impl AlmacState {
    pub fn new(base: usize) -> Self {
        Self::with_probe_cadence(base, PROBE_EVERY)
    }

    pub fn with_probe_cadence(base: usize, probe_every: usize) -> Self {
        Self { len: base, base, probe_every: probe_every.max(1), since_check: 0, checkpoints: 0, saved: None }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn probing(&self) -> bool {
        self.saved.is_some()
    }

    /// Runs after the learner's own end-of-schedule update. Resizes the
    /// learner when the length changes and returns the new length.
    pub fn adapt(&mut self, learner: &mut Learner, own: OwnOutcome, table: &FTable) -> Result<usize> {
        if let Some((saved, len)) = self.saved.take() {
            if own == OwnOutcome::Failure {
                *learner = saved;
                self.len = len;
            }
            self.since_check = 0;
            return Ok(self.len);
        }
        self.since_check += 1;
        if self.since_check < table.lookup(self.len)? as usize {
            return Ok(self.len);
        }
        self.since_check = 0;
        self.checkpoints += 1;
        if own == OwnOutcome::Failure {
            let doubled = (self.len * 2).min(self.base << MAX_DOUBLINGS);
            if doubled != self.len {
                self.len = doubled;
                learner.resize(doubled);
            }
        } else if self.checkpoints.is_multiple_of(self.probe_every) && self.len > self.base {
            self.saved = Some((learner.clone(), self.len));
            self.len /= 2;
            learner.resize(self.len);
        }
        Ok(self.len)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FEntry {
    pub f: u32,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Schedules needed for `C - 1` L-MAC stations to be collision-free with the
/// table's confidence, indexed by `C`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FTable {
    entries: BTreeMap<usize, FEntry>,
}

impl FTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, len: usize, entry: FEntry) {
        self.entries.insert(len, entry);
    }

    pub fn get(&self, len: usize) -> Option<&FEntry> {
        self.entries.get(&len)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &FEntry)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry for `len`; lengths past the end of the table scale the last
    /// entry linearly in `len`.
    pub fn lookup(&self, len: usize) -> Result<u32> {
        if let Some(e) = self.entries.get(&len) {
            return Ok(e.f);
        }
        match self.entries.iter().next_back() {
            Some((&top, e)) if len > top => Ok((e.f as usize * len).div_ceil(top) as u32),
            _ => Err(Error::MissingTableEntry(len)),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["C", "f", "ci_low", "ci_high"]).map_err(csv_err)?;
        for (len, e) in &self.entries {
            out.write_record([len.to_string(), e.f.to_string(), e.ci_low.to_string(), e.ci_high.to_string()])
                .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers().map_err(csv_err)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["C", "f", "ci_low", "ci_high"] {
            return Err(Error::Parse(format!("unexpected f-table header {headers:?}")));
        }
        let mut table = FTable::new();
        for row in rdr.records() {
            let row = row.map_err(csv_err)?;
            let field = |i: usize| row.get(i).unwrap_or("").trim().to_string();
            let parse_err = |i: usize| Error::Parse(format!("f-table row {:?}: bad field {i}", row));
            let len: usize = field(0).parse().map_err(|_| parse_err(0))?;
            let f: u32 = field(1).parse().map_err(|_| parse_err(1))?;
            let ci_low: f64 = field(2).parse().map_err(|_| parse_err(2))?;
            let ci_high: f64 = field(3).parse().map_err(|_| parse_err(3))?;
            table.insert(len, FEntry { f, ci_low, ci_high });
        }
        Ok(table)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Smallest `k` such that at least `confidence` of the samples are `<= k - 1`
/// (samples count schedules before the first clean one); `None` samples never
/// converged.
pub fn convergence_quantile(samples: &[Option<u64>], confidence: f64) -> Option<u32> {
    let mut done: Vec<u64> = samples.iter().flatten().copied().collect();
    done.sort_unstable();
    let need = (confidence * samples.len() as f64).ceil() as usize;
    if need == 0 {
        return Some(1);
    }
    done.get(need - 1).map(|k| *k as u32 + 1)
}

/// Monte Carlo f-table over the given lengths. Each replication places
/// `C - 1` L-MAC stations (learning strength `beta`) uniformly at random and
/// counts schedules until the first collision-free one; runs still colliding
/// after `cap` schedules count as failures. The interval is a percentile
/// bootstrap of the quantile.
pub fn f_table_build(
    lens: &[usize],
    confidence: f64,
    replications: usize,
    beta: f64,
    cap: u64,
    seed: u64,
) -> Result<FTable> {
    if replications < 1000 {
        return Err(invalid("replications", replications, "at least 1000 are needed"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid("confidence", confidence, "must lie in (0,1)"));
    }
    let params = crate::protocol::ProtocolParams { beta, ..Default::default() };
    let mut table = FTable::new();
    for &len in lens {
        if len < 2 {
            return Err(invalid("C", len, "must be at least 2"));
        }
        let samples: Vec<Option<u64>> = (0..replications as u64)
            .map(|i| {
                let run = crate::seeding::replication_seed(seed ^ (len as u64).rotate_left(32), i);
                crate::schedule_sim::convergence_schedules(
                    crate::protocol::ProtocolKind::Lmac,
                    &params,
                    len,
                    len - 1,
                    run,
                    cap,
                )
            })
            .collect::<Result<_>>()?;
        let f = convergence_quantile(&samples, confidence)
            .ok_or_else(|| invalid("cap", cap, "too few replications converged within the cap"))?;
        let (ci_low, ci_high) = bootstrap_interval(&samples, confidence, seed ^ len as u64);
        table.insert(len, FEntry { f, ci_low, ci_high });
    }
    Ok(table)
}

fn bootstrap_interval(samples: &[Option<u64>], confidence: f64, seed: u64) -> (f64, f64) {
    const RESAMPLES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats: Vec<f64> = (0..RESAMPLES)
        .map(|_| {
            let draw: Vec<Option<u64>> =
                (0..samples.len()).map(|_| samples[rng.random_range(0..samples.len())]).collect();
            convergence_quantile(&draw, confidence).map_or(f64::INFINITY, f64::from)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let at = |q: f64| stats[((q * RESAMPLES as f64) as usize).min(RESAMPLES - 1)];
    (at(0.025), at(0.975))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{init_protocol, Protocol, ProtocolKind, ProtocolParams};

    #[test]
    fn ap_rule() {
        assert_eq!(ap_adapt(16, 0), 17);
        assert_eq!(ap_adapt(16, 2), 15);
        assert_eq!(ap_adapt(16, 5), 15);
        assert_eq!(ap_adapt(16, 1), 16);
        assert_eq!(ap_adapt(1, 3), 1);
    }

    #[test]
    fn txop() {
        assert_eq!(txop_packets(16, 16).unwrap(), 1);
        assert_eq!(txop_packets(32, 16).unwrap(), 2);
        assert_eq!(txop_packets(64, 16).unwrap(), 4);
        assert!(txop_packets(48, 16).is_err());
        assert!(txop_packets(8, 16).is_err());
    }

    #[test]
    fn alzc_doubles_and_halves() {
        let mut a = AlzcState::new(16);
        assert_eq!(a.adapt(0), 32);
        // First schedule at the new length: no history to compare yet.
        assert_eq!(a.adapt(16), 32);
        assert_eq!(a.adapt(16), 16);
        assert_eq!(a.adapt(4), 16);
        assert_eq!(a.adapt(12), 16, "floor at the base length");
    }

    #[test]
    fn alzc_needs_equal_busy_counts() {
        let mut a = AlzcState::with_len(16, 64);
        assert_eq!(a.adapt(40), 64);
        assert_eq!(a.adapt(36), 64);
        assert_eq!(a.adapt(36), 32);
        let mut a = AlzcState::with_len(16, 1 << 14);
        assert_eq!(a.adapt(0), 1 << 14, "ceiling");
    }

    fn lmac(len: usize) -> Learner {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        match init_protocol(ProtocolKind::Lmac, len, 1, &ProtocolParams::default(), &mut rng).unwrap() {
            Protocol::Scheduled(l) => l,
            Protocol::Dcf(_) => unreachable!(),
        }
    }

    fn table(f: u32) -> FTable {
        let mut t = FTable::new();
        for len in [16, 32, 64] {
            t.insert(len, FEntry { f, ci_low: f as f64, ci_high: f as f64 });
        }
        t
    }

    #[test]
    fn almac_doubles_on_collision_at_checkpoint() {
        let t = table(3);
        let mut s = AlmacState::new(16);
        let mut l = lmac(16);
        assert_eq!(s.adapt(&mut l, OwnOutcome::Failure, &t).unwrap(), 16);
        assert_eq!(s.adapt(&mut l, OwnOutcome::Failure, &t).unwrap(), 16);
        assert_eq!(s.adapt(&mut l, OwnOutcome::Failure, &t).unwrap(), 32);
        assert_eq!(l.schedule_len(), 32);
        // Clean checkpoints leave the length alone.
        for _ in 0..6 {
            assert_eq!(s.adapt(&mut l, OwnOutcome::Success, &t).unwrap(), 32);
        }
    }

    #[test]
    fn almac_probe_commit_and_revert() {
        let t = table(1);
        let mut s = AlmacState::with_probe_cadence(16, 2);
        let mut l = lmac(16);
        s.adapt(&mut l, OwnOutcome::Failure, &t).unwrap();
        assert_eq!(s.len(), 32);
        assert_eq!(s.adapt(&mut l, OwnOutcome::Success, &t).unwrap(), 16, "second checkpoint probes");
        assert!(s.probing());
        let before_probe = l.clone();
        // Probe failure: restore the 32-slot learner.
        assert_eq!(s.adapt(&mut l, OwnOutcome::Failure, &t).unwrap(), 32);
        assert_eq!(l.schedule_len(), 32);
        assert_ne!(l, before_probe);
        assert_eq!(s.adapt(&mut l, OwnOutcome::Success, &t).unwrap(), 32);
        assert_eq!(s.adapt(&mut l, OwnOutcome::Success, &t).unwrap(), 16);
        // Probe success: stay at 16.
        assert_eq!(s.adapt(&mut l, OwnOutcome::Success, &t).unwrap(), 16);
        assert!(!s.probing());
        assert_eq!(l.schedule_len(), 16);
    }

    #[test]
    fn lookup_and_csv_round_trip() {
        let mut t = FTable::new();
        t.insert(2, FEntry { f: 1, ci_low: 1.0, ci_high: 1.0 });
        t.insert(16, FEntry { f: 40, ci_low: 37.0, ci_high: 44.0 });
        assert_eq!(t.lookup(16).unwrap(), 40);
        assert_eq!(t.lookup(64).unwrap(), 160);
        assert_eq!(t.lookup(8), Err(Error::MissingTableEntry(8)));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("C,f,ci_low,ci_high\n2,1,1,1\n16,40,37,44\n"));
        assert_eq!(FTable::read_csv(buf.as_slice()).unwrap(), t);
        assert!(FTable::read_csv("x,y\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn quantile_counts_failures() {
        let s: Vec<Option<u64>> = (0..100).map(|i| Some(i % 10)).collect();
        assert_eq!(convergence_quantile(&s, 0.95), Some(10));
        assert_eq!(convergence_quantile(&vec![Some(0); 50], 0.95), Some(1));
        let mut s: Vec<Option<u64>> = vec![Some(0); 90];
        s.extend([None; 10]);
        assert_eq!(convergence_quantile(&s, 0.95), None);
    }

    #[test]
    fn built_table_shape() {
        let t = f_table_build(&[2, 8, 16], 0.95, 1000, 0.95, 100_000, 7).unwrap();
        assert_eq!(t.get(2).unwrap().f, 1);
        assert!(t.get(16).unwrap().f > t.get(8).unwrap().f);
        let e = t.get(16).unwrap();
        assert!(e.ci_low <= e.f as f64 && e.f as f64 <= e.ci_high, "{e:?}");
        assert!(f_table_build(&[8], 0.95, 999, 0.95, 100, 1).is_err());
    }
}
