//! Quantities derived from traces: convergence time, fairness, collision
//! rate, throughput, access delay and achievable arrival rate.

use std::collections::HashSet;

use crate::engine::{Adaptation, Horizon, SimConfig, Simulator};
use crate::error::{invalid, Error, Result};
use crate::phy::{PhyParams, SlotClass};
use crate::trace::{Delivery, EventRecord, Observer, SlotRecord, SlotView};
use crate::traffic::TrafficModel;

/// First collision-free schedule of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Convergence {
    /// Schedules played before it.
    pub schedules: u64,
    pub start_slot: u64,
    pub start_us: f64,
}

impl Convergence {
    pub fn seconds(&self) -> f64 {
        self.start_us * 1e-6
    }
}

/// Scans schedule-aligned windows of `slots` slots, starting at slot 0, for
/// the first one in which all `stations` transmit successfully and nothing
/// collides.
pub fn detect_convergence(trace: &[SlotRecord], stations: usize, slots: usize) -> Option<Convergence> {
    let mut tracker = AlignedConvergence::new(stations, slots, 0);
    for s in trace {
        tracker.on_slot(&SlotView {
            index: s.index,
            start_us: s.start_us,
            duration_us: s.duration_us,
            class: s.class,
            transmitters: &s.transmitters,
        });
        if let Some(c) = tracker.result() {
            return Some(c);
        }
    }
    None
}

/// Same question answered from the per-station event log: the first
/// schedule index at which every station reports a slot no other station
/// chose.
pub fn detect_convergence_from_events(events: &[EventRecord], stations: usize) -> Option<u64> {
    let mut by_schedule: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
    for e in events {
        by_schedule.entry(e.schedule_index).or_default().push(e.chosen_slot);
    }
    by_schedule.into_iter().find_map(|(k, chosen)| {
        let distinct: HashSet<usize> = chosen.iter().copied().collect();
        (chosen.len() == stations && distinct.len() == stations).then_some(k)
    })
}

/// Online form of [`detect_convergence`].
#[derive(Clone, Debug)]
pub struct AlignedConvergence {
    stations: usize,
    slots: u64,
    origin: u64,
    window: u64,
    window_start_us: f64,
    clean: bool,
    seen: Vec<u64>,
    distinct: usize,
    found: Option<Convergence>,
}

impl AlignedConvergence {
    pub fn new(stations: usize, slots: usize, origin: u64) -> Self {
        Self {
            stations,
            slots: slots as u64,
            origin,
            window: u64::MAX,
            window_start_us: 0.0,
            clean: true,
            seen: Vec::new(),
            distinct: 0,
            found: None,
        }
    }

    pub fn result(&self) -> Option<Convergence> {
        self.found
    }
}

impl Observer for AlignedConvergence {
    fn on_slot(&mut self, s: &SlotView<'_>) {
        if self.found.is_some() || s.index < self.origin {
            return;
        }
        let rel = s.index - self.origin;
        let window = rel / self.slots;
        if window != self.window {
            self.window = window;
            self.window_start_us = s.start_us;
            self.clean = true;
            self.distinct = 0;
        }
        match s.class {
            SlotClass::Success { .. } => {
                let id = s.transmitters[0] as usize;
                if self.seen.len() < id {
                    self.seen.resize(id, u64::MAX);
                }
                if self.seen[id - 1] != window {
                    self.seen[id - 1] = window;
                    self.distinct += 1;
                }
            }
            SlotClass::Collision | SlotClass::Error => self.clean = false,
            SlotClass::Idle => {}
        }
        if rel % self.slots == self.slots - 1 && self.clean && self.distinct == self.stations {
            self.found = Some(Convergence {
                schedules: window,
                start_slot: self.origin + window * self.slots,
                start_us: self.window_start_us,
            });
        }
    }
}

/// First window of `slots` consecutive slots, in any phase, starting no
/// earlier than `after`, that holds one success from each of `stations`
/// stations and no collision or error. Works when stations do not share a
/// schedule origin.
#[derive(Clone, Debug)]
pub struct SlidingConvergence {
    stations: usize,
    slots: usize,
    after: u64,
    ring: std::collections::VecDeque<(Option<u32>, bool, f64, u64)>,
    counts: Vec<u32>,
    distinct: usize,
    dirty: usize,
    found: Option<Convergence>,
}

impl SlidingConvergence {
    pub fn new(stations: usize, slots: usize, after: u64) -> Self {
        Self {
            stations,
            slots,
            after,
            ring: Default::default(),
            counts: Vec::new(),
            distinct: 0,
            dirty: 0,
            found: None,
        }
    }

    pub fn result(&self) -> Option<Convergence> {
        self.found
    }
}

impl Observer for SlidingConvergence {
    fn on_slot(&mut self, s: &SlotView<'_>) {
        if self.found.is_some() || s.index < self.after {
            return;
        }
        let success = match s.class {
            SlotClass::Success { .. } => Some(s.transmitters[0]),
            _ => None,
        };
        let dirty = matches!(s.class, SlotClass::Collision | SlotClass::Error);
        if let Some(id) = success {
            let id = id as usize;
            if self.counts.len() < id {
                self.counts.resize(id, 0);
            }
            self.counts[id - 1] += 1;
            if self.counts[id - 1] == 1 {
                self.distinct += 1;
            }
        }
        self.dirty += dirty as usize;
        self.ring.push_back((success, dirty, s.start_us, s.index));
        if self.ring.len() > self.slots {
            let (old, was_dirty, _, _) = self.ring.pop_front().expect("nonempty");
            if let Some(id) = old {
                self.counts[id as usize - 1] -= 1;
                if self.counts[id as usize - 1] == 0 {
                    self.distinct -= 1;
                }
            }
            self.dirty -= was_dirty as usize;
        }
        if self.ring.len() == self.slots && self.dirty == 0 && self.distinct == self.stations {
            let &(_, _, start_us, start_slot) = self.ring.front().expect("nonempty");
            self.found =
                Some(Convergence { schedules: (start_slot - self.after) / self.slots as u64, start_slot, start_us });
        }
    }
}

/// Jain's index averaged over consecutive non-overlapping windows of
/// `w = m N` successes. `None` when the sequence is shorter than one window.
/// Ids are the 1-based station ids used in traces.
pub fn jain_index(sequence: &[u32], stations: usize, m: usize) -> Option<f64> {
    let w = m * stations;
    if w == 0 || sequence.len() < w {
        return None;
    }
    let windows = sequence.len() / w;
    let mut counts = vec![0u64; stations];
    let mut total = 0.0;
    for chunk in sequence.chunks_exact(w).take(windows) {
        counts.iter_mut().for_each(|c| *c = 0);
        for &id in chunk {
            counts[id as usize - 1] += 1;
        }
        let sum: u64 = counts.iter().sum();
        let sq: u64 = counts.iter().map(|c| c * c).sum();
        total += (sum * sum) as f64 / (stations as f64 * sq as f64);
    }
    Some(total / windows as f64)
}

/// Share of transmission attempts that ended in a collision. Errored frames
/// count as attempts but not as collisions.
pub fn collision_rate(trace: &[SlotRecord]) -> Option<f64> {
    let mut tally = SlotTally::default();
    for s in trace {
        tally.add(s.class, s.transmitters.len(), s.duration_us);
    }
    tally.collision_rate()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Throughput {
    /// Payload airtime over elapsed time.
    pub normalised: f64,
    pub mbps: f64,
}

pub fn throughput(trace: &[SlotRecord], phy: &PhyParams) -> Result<Throughput> {
    let mut tally = SlotTally::default();
    for s in trace {
        tally.add(s.class, s.transmitters.len(), s.duration_us);
    }
    tally.throughput(phy)
}

/// Mean head-of-line to completion time of delivered packets, optionally for
/// one station. Dropped packets are excluded.
pub fn access_delay(deliveries: &[Delivery], station: Option<u32>) -> Option<f64> {
    let delays: Vec<f64> = deliveries
        .iter()
        .filter(|d| !d.dropped && station.is_none_or(|s| s == d.station))
        .map(Delivery::access_delay)
        .collect();
    (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64)
}

/// Running slot counts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SlotTally {
    pub idle: u64,
    pub success: u64,
    pub collision: u64,
    pub error: u64,
    pub attempts: u64,
    pub collided_attempts: u64,
    pub packets: u64,
    pub elapsed_us: f64,
}

impl SlotTally {
    pub fn add(&mut self, class: SlotClass, transmitters: usize, duration: f64) {
        self.elapsed_us += duration;
        self.attempts += transmitters as u64;
        match class {
            SlotClass::Idle => self.idle += 1,
            SlotClass::Success { packets } => {
                self.success += 1;
                self.packets += packets as u64;
            }
            SlotClass::Collision => {
                self.collision += 1;
                self.collided_attempts += transmitters as u64;
            }
            SlotClass::Error => self.error += 1,
        }
    }

    pub fn slots(&self) -> u64 {
        self.idle + self.success + self.collision + self.error
    }

    pub fn collision_rate(&self) -> Option<f64> {
        (self.attempts > 0).then(|| self.collided_attempts as f64 / self.attempts as f64)
    }

    pub fn throughput(&self, phy: &PhyParams) -> Result<Throughput> {
        if self.elapsed_us <= 0.0 {
            return Err(Error::Undefined("throughput over zero elapsed time"));
        }
        let bits = self.packets as f64 * phy.payload_bytes as f64 * 8.0;
        let mbps = bits / self.elapsed_us;
        Ok(Throughput { normalised: mbps / phy.data_rate, mbps })
    }

    pub fn minus(&self, earlier: &SlotTally) -> SlotTally {
        SlotTally {
            idle: self.idle - earlier.idle,
            success: self.success - earlier.success,
            collision: self.collision - earlier.collision,
            error: self.error - earlier.error,
            attempts: self.attempts - earlier.attempts,
            collided_attempts: self.collided_attempts - earlier.collided_attempts,
            packets: self.packets - earlier.packets,
            elapsed_us: self.elapsed_us - earlier.elapsed_us,
        }
    }
}

impl Observer for SlotTally {
    fn on_slot(&mut self, s: &SlotView<'_>) {
        self.add(s.class, s.transmitters.len(), s.duration_us);
    }
}

/// Collects what [`RunMetrics`] needs without storing the trace.
#[derive(Clone, Debug)]
pub struct RunRecorder {
    pub convergence: AlignedConvergence,
    pub total: SlotTally,
    /// Totals at the start of the current aligned window; frozen once the
    /// run converges.
    window_mark: SlotTally,
    window: u64,
    slots: u64,
    /// Successful station ids before the first collision-free schedule, or
    /// every success when convergence is not tracked.
    pub pre_convergence: Vec<u32>,
    tracking: bool,
    pending: Vec<u32>,
    delay_sum: f64,
    delay_count: u64,
    pub per_station: Vec<u64>,
}

impl RunRecorder {
    pub fn new(stations: usize, slots: usize) -> Self {
        Self {
            convergence: AlignedConvergence::new(stations, slots, 0),
            total: SlotTally::default(),
            window_mark: SlotTally::default(),
            window: 0,
            slots: slots as u64,
            pre_convergence: Vec::new(),
            tracking: true,
            pending: Vec::new(),
            delay_sum: 0.0,
            delay_count: 0,
            per_station: vec![0; stations],
        }
    }

    /// Recorder suited to `config`: convergence is only tracked when every
    /// station keeps a fixed-length schedule, since the aligned detector
    /// means nothing for DCF or for changing lengths.
    pub fn for_config(config: &SimConfig) -> Self {
        let mut rec = Self::new(config.stations(), config.slots);
        rec.tracking = config.adaptation == Adaptation::Fixed
            && config.groups.iter().chain(config.joins.iter().map(|j| &j.group)).all(|g| g.protocol.is_scheduled());
        rec
    }

    pub fn converged(&self) -> Option<Convergence> {
        if self.tracking {
            self.convergence.result()
        } else {
            None
        }
    }

    /// Counts since the first collision-free schedule began.
    pub fn after_convergence(&self) -> Option<SlotTally> {
        self.converged().map(|_| self.total.minus(&self.window_mark))
    }

    pub fn mean_delay(&self) -> Option<f64> {
        (self.delay_count > 0).then(|| self.delay_sum / self.delay_count as f64)
    }
}

impl Observer for RunRecorder {
    fn on_slot(&mut self, s: &SlotView<'_>) {
        if !self.tracking {
            if let SlotClass::Success { .. } = s.class {
                self.pre_convergence.push(s.transmitters[0]);
            }
            self.total.on_slot(s);
            return;
        }
        let converged_before = self.converged().is_some();
        if !converged_before {
            let window = s.index / self.slots;
            if window != self.window {
                self.window = window;
                self.window_mark = self.total;
                self.pre_convergence.append(&mut self.pending);
            }
            if let SlotClass::Success { .. } = s.class {
                self.pending.push(s.transmitters[0]);
            }
        }
        self.total.on_slot(s);
        self.convergence.on_slot(s);
    }

    fn on_delivery(&mut self, d: &Delivery) {
        if d.dropped {
            return;
        }
        self.delay_sum += d.access_delay();
        self.delay_count += 1;
        let i = d.station as usize - 1;
        if self.per_station.len() <= i {
            self.per_station.resize(i + 1, 0);
        }
        self.per_station[i] += 1;
    }
}

/// Per-run output row.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    pub protocol: String,
    pub stations: usize,
    pub slots: usize,
    pub beta: f64,
    pub gamma: Option<f64>,
    pub error_rate: f64,
    pub kappa_schedules: Option<u64>,
    pub conv_seconds: Option<f64>,
    pub thr_norm: f64,
    pub thr_mbps: f64,
    pub coll_rate: Option<f64>,
    pub mean_delay_us: Option<f64>,
    pub jain: [Option<f64>; 10],
    /// Delivered packets per second, per station.
    pub goodput: Vec<f64>,
}

impl RunMetrics {
    pub const HEADER: [&'static str; 23] = [
        "seed",
        "protocol",
        "N",
        "C",
        "beta",
        "gamma",
        "err_rate",
        "kappa_schedules",
        "conv_seconds",
        "thr_norm",
        "thr_mbps",
        "coll_rate",
        "mean_delay_us",
        "jain_m1",
        "jain_m2",
        "jain_m3",
        "jain_m4",
        "jain_m5",
        "jain_m6",
        "jain_m7",
        "jain_m8",
        "jain_m9",
        "jain_m10",
    ];

    pub fn from_recorder(rec: &RunRecorder, sim: &Simulator) -> Result<Self> {
        let cfg = sim.config();
        let stations = sim.station_count();
        let thr = rec.total.throughput(&cfg.phy)?;
        let conv = rec.converged();
        let mut jain = [None; 10];
        for (m, slot) in jain.iter_mut().enumerate() {
            *slot = jain_index(&rec.pre_convergence, stations, m + 1);
        }
        let seconds = rec.total.elapsed_us * 1e-6;
        let gamma = cfg
            .groups
            .iter()
            .any(|g| g.protocol == crate::protocol::ProtocolKind::Lzc)
            .then(|| cfg.params.gamma.resolve(cfg.slots, cfg.total_stations()));
        Ok(Self {
            seed: cfg.seed,
            protocol: protocol_label(cfg),
            stations,
            slots: cfg.slots,
            beta: cfg.params.beta,
            gamma,
            error_rate: cfg.error_rate,
            kappa_schedules: conv.map(|c| c.schedules),
            conv_seconds: conv.map(|c| c.seconds()),
            thr_norm: thr.normalised,
            thr_mbps: thr.mbps,
            coll_rate: rec.total.collision_rate(),
            mean_delay_us: rec.mean_delay(),
            jain,
            goodput: rec.per_station.iter().map(|&p| p as f64 / seconds).collect(),
        })
    }

    pub fn row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let mut row = vec![
            self.seed.to_string(),
            self.protocol.clone(),
            self.stations.to_string(),
            self.slots.to_string(),
            self.beta.to_string(),
            opt(self.gamma),
            self.error_rate.to_string(),
            self.kappa_schedules.map_or_else(String::new, |k| k.to_string()),
            opt(self.conv_seconds),
            self.thr_norm.to_string(),
            self.thr_mbps.to_string(),
            opt(self.coll_rate),
            opt(self.mean_delay_us),
        ];
        row.extend(self.jain.iter().map(|j| opt(*j)));
        row
    }
}

fn protocol_label(cfg: &SimConfig) -> String {
    let mut names: Vec<&str> = cfg.groups.iter().map(|g| g.protocol.name()).collect();
    names.dedup();
    names.join("+")
}

/// Runs one configuration to its horizon and measures it.
pub fn measure(config: &SimConfig) -> Result<RunMetrics> {
    let mut sim = Simulator::new(config.clone())?;
    let mut rec = RunRecorder::for_config(config);
    sim.run_for(config.horizon, &mut rec)?;
    RunMetrics::from_recorder(&rec, &sim)
}

/// Mean, standard error and the Gaussian 95% half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub stderr: f64,
    pub ci95: f64,
}

pub fn summarize(samples: &[f64]) -> Option<Summary> {
    let n = samples.len();
    if n == 0 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd =
        if n > 1 { (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    let stderr = sd / (n as f64).sqrt();
    Some(Summary { n, mean, sd, stderr, ci95: 1.96 * stderr })
}

/// Per-station utilisation `rho = lambda * E[service]`, with service measured
/// from head of line to completion (drops included).
#[derive(Clone, Debug, Default)]
struct ServiceTimes {
    sum: Vec<f64>,
    count: Vec<u64>,
}

impl Observer for ServiceTimes {
    fn on_delivery(&mut self, d: &Delivery) {
        let i = d.station as usize - 1;
        if self.sum.len() <= i {
            self.sum.resize(i + 1, 0.0);
            self.count.resize(i + 1, 0);
        }
        self.sum[i] += d.access_delay();
        self.count[i] += 1;
    }
}

/// Largest per-station utilisation at Poisson rate `rate` (packets/s).
pub fn max_utilisation(config: &SimConfig, rate: f64) -> Result<f64> {
    let cfg = SimConfig { traffic: TrafficModel::poisson(rate), ..config.clone() };
    let mut sim = Simulator::new(cfg.clone())?;
    let mut times = ServiceTimes::default();
    sim.run_for(cfg.horizon, &mut times)?;
    let mut worst = 0.0f64;
    for i in 0..sim.station_count() {
        let count = times.count.get(i).copied().unwrap_or(0);
        if count == 0 {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(rate * 1e-6 * times.sum[i] / count as f64);
    }
    Ok(worst)
}

/// Bisection for the largest arrival rate (packets/s per station) at which
/// every station keeps `rho < 1`. The search starts from `[0, high]`; if the
/// estimate at the lower end ever reads unstable, the horizon is doubled once
/// and the search restarted.
pub fn achievable_rate(config: &SimConfig, high: f64, tolerance: f64) -> Result<f64> {
    if !(high > 0.0 && tolerance > 0.0) {
        return Err(invalid("rate_bound", high, "bound and tolerance must be positive"));
    }
    let mut cfg = config.clone();
    for attempt in 0..2 {
        let (mut lo, mut hi) = (0.0, high);
        let mut consistent = true;
        while hi - lo > tolerance {
            let mid = 0.5 * (lo + hi);
            if max_utilisation(&cfg, mid)? < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo > 0.0 && max_utilisation(&cfg, lo)? >= 1.0 {
            consistent = false;
        }
        if consistent || attempt == 1 {
            return Ok(lo);
        }
        cfg.horizon = match cfg.horizon {
            Horizon::Slots(n) => Horizon::Slots(2 * n),
            Horizon::Seconds(s) => Horizon::Seconds(2.0 * s),
        };
    }
    unreachable!("loop returns on its second pass")
}
