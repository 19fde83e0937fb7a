//! The slot engine: advances every station one MAC slot at a time and owns
//! simulated time.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::adapt::{ap_adapt, AlmacState, AlzcState, FTable, MAX_DOUBLINGS, PROBE_EVERY};
use crate::error::{invalid, Result};
use crate::phy::{PhyParams, SlotClass};
use crate::protocol::{
    init_protocol, Dcf, Learner, OwnOutcome, Protocol, ProtocolKind, ProtocolParams, ScheduleLearner,
};
use crate::seeding::{channel_rng, station_rng, traffic_rng};
use crate::trace::{Delivery, EventRecord, Observer, SlotView, Trace};
use crate::traffic::{PacketQueue, TrafficModel};

#[derive(Clone, Debug, PartialEq)]
pub enum Adaptation {
    /// Schedule length never changes.
    Fixed,
    /// An access point announces `C`, moving it by one per schedule.
    AccessPoint,
    /// Doubling/halving driven by idle-slot counts (A-ZC / A-L-ZC).
    Alzc,
    /// Checkpoint doubling and probed halving (A-L-MAC).
    Almac { table: Arc<FTable>, probe_every: usize },
}

impl Adaptation {
    pub fn almac(table: FTable) -> Self {
        Adaptation::Almac { table: Arc::new(table), probe_every: PROBE_EVERY }
    }

    /// Stations scale their TXOP with schedule length.
    pub fn uses_base(&self) -> bool {
        matches!(self, Adaptation::Alzc | Adaptation::Almac { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Adaptation::Fixed => "fixed",
            Adaptation::AccessPoint => "ap",
            Adaptation::Alzc => "alzc",
            Adaptation::Almac { .. } => "almac",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    Slots(u64),
    Seconds(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StationGroup {
    pub protocol: ProtocolKind,
    pub count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JoinTime {
    Slot(u64),
    Seconds(f64),
}

/// Stations that switch on part-way through a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Join {
    pub at: JoinTime,
    pub group: StationGroup,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub groups: Vec<StationGroup>,
    /// Schedule length `C`, or the base length `B` under MIMD adaptation.
    pub slots: usize,
    pub params: ProtocolParams,
    pub adaptation: Adaptation,
    pub traffic: TrafficModel,
    pub error_rate: f64,
    pub phy: PhyParams,
    pub horizon: Horizon,
    pub seed: u64,
    pub joins: Vec<Join>,
}

impl SimConfig {
    /// `stations` saturated stations running `protocol` over a clean channel.
    pub fn new(protocol: ProtocolKind, stations: usize, slots: usize) -> Self {
        Self {
            groups: vec![StationGroup { protocol, count: stations }],
            slots,
            params: ProtocolParams::default(),
            adaptation: Adaptation::Fixed,
            traffic: TrafficModel::Saturated,
            error_rate: 0.0,
            phy: PhyParams::table(),
            horizon: Horizon::Slots(10_000),
            seed: 0,
            joins: Vec::new(),
        }
    }

    /// Stations present at the start.
    pub fn stations(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    /// Stations present once every join has happened.
    pub fn total_stations(&self) -> usize {
        self.stations() + self.joins.iter().map(|j| j.group.count).sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stations() == 0 {
            return Err(invalid("stations", 0, "must be at least 1"));
        }
        if self.slots == 0 {
            return Err(invalid("slots", 0, "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.error_rate) {
            return Err(invalid("error_rate", self.error_rate, "must lie in [0,1]"));
        }
        self.phy.validate()?;
        self.traffic.validate()?;
        for g in self.groups.iter().chain(self.joins.iter().map(|j| &j.group)) {
            self.params.validate(g.protocol)?;
            if g.protocol == ProtocolKind::Lmac && self.slots < 2 {
                return Err(invalid("slots", self.slots, "L-MAC needs at least two slots"));
            }
        }
        match self.horizon {
            Horizon::Seconds(s) if !(s >= 0.0 && s.is_finite()) => {
                return Err(invalid("horizon_seconds", s, "must be finite and non-negative"));
            }
            _ => {}
        }
        if let Adaptation::Almac { table, probe_every } = &self.adaptation {
            if *probe_every == 0 {
                return Err(invalid("probe_every", 0, "must be at least 1"));
            }
            for k in 0..=MAX_DOUBLINGS {
                table.lookup(self.slots << k)?;
            }
        }
        Ok(())
    }
}

/// Ring of recent busy/idle flags indexed by global slot.
#[derive(Clone, Debug)]
struct History {
    flags: Vec<bool>,
    mask: u64,
}

impl History {
    fn new(len: usize) -> Self {
        let cap = len.next_power_of_two().max(1);
        Self { flags: vec![false; cap], mask: cap as u64 - 1 }
    }

    fn ensure(&mut self, len: usize, now: u64) {
        if len <= self.flags.len() {
            return;
        }
        let mut grown = History::new(len);
        let keep = self.flags.len() as u64;
        for t in now.saturating_sub(keep)..now {
            grown.flags[(t & grown.mask) as usize] = self.flags[(t & self.mask) as usize];
        }
        *self = grown;
    }

    fn record(&mut self, t: u64, busy: bool) {
        self.flags[(t & self.mask) as usize] = busy;
    }

    fn idle_positions(&self, start: u64, len: usize, out: &mut Vec<usize>) {
        out.clear();
        for k in 0..len as u64 {
            if !self.flags[((start + k) & self.mask) as usize] {
                out.push(k as usize + 1);
            }
        }
    }

    fn idle_count(&self, start: u64, len: usize) -> usize {
        (0..len as u64).filter(|k| !self.flags[((start + k) & self.mask) as usize]).count()
    }
}

#[derive(Clone, Debug)]
enum StationAdapt {
    Fixed,
    AccessPoint,
    Alzc(AlzcState),
    Almac(AlmacState),
}

#[derive(Clone, Debug)]
struct Scheduled {
    learner: Learner,
    /// First global slot of the current schedule.
    start: u64,
    index: u64,
    own: Option<OwnOutcome>,
    txop: u32,
    adapt: StationAdapt,
    needs_idle: bool,
}

impl Scheduled {
    fn tx_slot(&self) -> u64 {
        self.start + self.learner.current_slot() as u64 - 1
    }

    fn end_slot(&self) -> u64 {
        self.start + self.learner.schedule_len() as u64 - 1
    }
}

#[derive(Clone, Debug)]
enum Control {
    Dcf { dcf: Dcf, counter: u32 },
    Scheduled(Scheduled),
}

#[derive(Clone, Debug)]
struct Station {
    id: u32,
    kind: ProtocolKind,
    control: Control,
    queue: PacketQueue,
    rng: ChaCha8Rng,
    traffic_rng: ChaCha8Rng,
    joined_slot: u64,
    joined_us: f64,
    transmitting: bool,
    delivered: u64,
    dropped: u64,
}

/// Snapshot of one station for instrumentation.
#[derive(Clone, Debug, PartialEq)]
pub struct StationInfo {
    pub id: u32,
    pub protocol: ProtocolKind,
    pub slot: Option<usize>,
    pub schedule_len: Option<usize>,
    pub schedule_index: Option<u64>,
    pub backoff: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub joined_slot: u64,
    pub joined_us: f64,
    pub lmac_probabilities: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
struct AccessPoint {
    len: usize,
    start: u64,
}

pub struct Simulator {
    config: SimConfig,
    stations: Vec<Station>,
    slot: u64,
    clock: f64,
    history: History,
    channel: Option<ChaCha8Rng>,
    ap: Option<AccessPoint>,
    joined: Vec<bool>,
    total_stations: usize,
    sigma: f64,
    t_c: f64,
    success_times: Vec<f64>,
    transmitters: Vec<u32>,
    idle: Vec<usize>,
    popped: Vec<f64>,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let phy = &config.phy;
        let ap = (config.adaptation == Adaptation::AccessPoint).then_some(AccessPoint { len: config.slots, start: 0 });
        let max_len = match config.adaptation {
            Adaptation::Fixed | Adaptation::AccessPoint => config.slots,
            _ => config.slots << MAX_DOUBLINGS,
        };
        let mut sim = Self {
            sigma: phy.sigma,
            t_c: phy.t_c(),
            success_times: (0..=1 << MAX_DOUBLINGS).map(|m| if m == 0 { 0.0 } else { phy.success_time(m) }).collect(),
            channel: (config.error_rate > 0.0).then(|| channel_rng(config.seed)),
            history: History::new(max_len.min(1 << 20)),
            total_stations: config.total_stations(),
            stations: Vec::new(),
            slot: 0,
            clock: 0.0,
            ap,
            joined: vec![false; config.joins.len()],
            transmitters: Vec::new(),
            idle: Vec::new(),
            popped: Vec::new(),
            config,
        };
        for g in sim.config.groups.clone() {
            sim.add_group(g)?;
        }
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Index of the next slot to be played.
    pub fn slot_index(&self) -> u64 {
        self.slot
    }

    pub fn clock_us(&self) -> f64 {
        self.clock
    }

    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    /// Schedule length currently announced by the access point.
    pub fn announced_len(&self) -> Option<usize> {
        self.ap.as_ref().map(|a| a.len)
    }

    pub fn stations(&self) -> Vec<StationInfo> {
        self.stations.iter().map(|s| self.info(s)).collect()
    }

    fn info(&self, s: &Station) -> StationInfo {
        let (slot, len, index, backoff, probs) = match &s.control {
            Control::Dcf { counter, .. } => (None, None, None, *counter as u64, None),
            Control::Scheduled(sc) => (
                Some(sc.learner.current_slot()),
                Some(sc.learner.schedule_len()),
                Some(sc.index),
                sc.tx_slot().saturating_sub(self.slot),
                sc.learner.as_lmac().map(|l| l.probabilities().to_vec()),
            ),
        };
        StationInfo {
            id: s.id,
            protocol: s.kind,
            slot,
            schedule_len: len,
            schedule_index: index,
            backoff,
            delivered: s.delivered,
            dropped: s.dropped,
            joined_slot: s.joined_slot,
            joined_us: s.joined_us,
            lmac_probabilities: probs,
        }
    }

    /// Switches on `group` before the next slot, as if it had been listed
    /// as a join at the current time.
    pub fn add_stations(&mut self, group: StationGroup) -> Result<()> {
        self.config.params.validate(group.protocol)?;
        self.total_stations += group.count;
        self.add_group(group)
    }

    fn add_group(&mut self, g: StationGroup) -> Result<()> {
        for _ in 0..g.count {
            let index = self.stations.len();
            let mut rng = station_rng(self.config.seed, index);
            let mut traffic_rng = traffic_rng(self.config.seed, index);
            let len = match &self.ap {
                Some(ap) => ap.len,
                None => self.config.slots,
            };
            let protocol = init_protocol(g.protocol, len, self.total_stations, &self.config.params, &mut rng)?;
            let control = match protocol {
                Protocol::Dcf(dcf) => {
                    let counter = dcf.draw(&mut rng);
                    Control::Dcf { dcf, counter }
                }
                Protocol::Scheduled(learner) => {
                    let base = self.config.slots;
                    let adapt = match &self.config.adaptation {
                        Adaptation::Fixed => StationAdapt::Fixed,
                        Adaptation::AccessPoint => StationAdapt::AccessPoint,
                        Adaptation::Alzc => StationAdapt::Alzc(AlzcState::new(base)),
                        Adaptation::Almac { probe_every, .. } => {
                            StationAdapt::Almac(AlmacState::with_probe_cadence(base, *probe_every))
                        }
                    };
                    let needs_idle = matches!(g.protocol, ProtocolKind::Zc | ProtocolKind::Lzc)
                        || matches!(adapt, StationAdapt::Alzc(_));
                    Control::Scheduled(Scheduled {
                        learner,
                        start: self.slot,
                        index: 0,
                        own: None,
                        txop: 1,
                        adapt,
                        needs_idle,
                    })
                }
            };
            let queue = PacketQueue::new(self.config.traffic, self.clock, &mut traffic_rng);
            self.stations.push(Station {
                id: index as u32 + 1,
                kind: g.protocol,
                control,
                queue,
                rng,
                traffic_rng,
                joined_slot: self.slot,
                joined_us: self.clock,
                transmitting: false,
                delivered: 0,
                dropped: 0,
            });
        }
        Ok(())
    }

    fn admit_joins(&mut self) -> Result<()> {
        for k in 0..self.joined.len() {
            let join = self.config.joins[k];
            let due = match join.at {
                JoinTime::Slot(s) => self.slot >= s,
                JoinTime::Seconds(t) => self.clock >= t * 1e6,
            };
            if due && !self.joined[k] {
                self.joined[k] = true;
                self.add_group(join.group)?;
            }
        }
        Ok(())
    }

    /// Plays one MAC slot.
    pub fn step<O: Observer + ?Sized>(&mut self, obs: &mut O) -> Result<SlotClass> {
        self.admit_joins()?;
        let t = self.slot;
        self.transmitters.clear();
        let mut packets = 0;
        for st in &mut self.stations {
            let (due, txop) = match &st.control {
                Control::Dcf { counter, .. } => (*counter == 0, 1),
                Control::Scheduled(sc) => (sc.tx_slot() == t, sc.txop),
            };
            st.transmitting = due && st.queue.has_packet();
            if st.transmitting {
                self.transmitters.push(st.id);
                packets = (txop as usize).min(st.queue.len()) as u32;
            }
        }
        let class = match self.transmitters.len() {
            0 => SlotClass::Idle,
            1 => {
                let errored = match &mut self.channel {
                    Some(rng) => rng.random_bool(self.config.error_rate),
                    None => false,
                };
                if errored {
                    SlotClass::Error
                } else {
                    SlotClass::Success { packets }
                }
            }
            _ => SlotClass::Collision,
        };
        let duration = match class {
            SlotClass::Idle => self.sigma,
            SlotClass::Collision | SlotClass::Error => self.t_c,
            SlotClass::Success { packets } => self.success_times[packets as usize],
        };
        let busy = class != SlotClass::Idle;
        self.history.record(t, busy);
        obs.on_slot(&SlotView {
            index: t,
            start_us: self.clock,
            duration_us: duration,
            class,
            transmitters: &self.transmitters,
        });
        self.clock += duration;
        let now = self.clock;

        if let Some(ap) = &mut self.ap {
            if t + 1 == ap.start + ap.len as u64 {
                let idle = self.history.idle_count(ap.start, ap.len);
                ap.start = t + 1;
                ap.len = ap_adapt(ap.len, idle);
                self.history.ensure(ap.len, t + 1);
            }
        }
        let announced = self.ap.as_ref().map(|a| a.len);
        let success = matches!(class, SlotClass::Success { .. });

        for st in &mut self.stations {
            let mut delivered = 0u32;
            let mut dropped = false;
            match &mut st.control {
                Control::Dcf { dcf, counter } => {
                    if st.transmitting {
                        let outcome = if success { OwnOutcome::Success } else { OwnOutcome::Failure };
                        let (next, drop) = dcf.on_outcome(outcome, &mut st.rng);
                        *counter = next;
                        dropped = drop;
                        if success {
                            delivered = 1;
                        }
                    } else if *counter > 0 {
                        *counter -= 1;
                    }
                }
                Control::Scheduled(sc) => {
                    if sc.tx_slot() == t {
                        sc.own = Some(if st.transmitting {
                            if success {
                                delivered = packets;
                                OwnOutcome::Success
                            } else {
                                OwnOutcome::Failure
                            }
                        } else if busy {
                            OwnOutcome::Failure
                        } else {
                            OwnOutcome::Success
                        });
                    }
                    if sc.end_slot() == t {
                        let len = sc.learner.schedule_len();
                        if sc.needs_idle {
                            self.history.idle_positions(sc.start, len, &mut self.idle);
                        } else {
                            self.idle.clear();
                        }
                        let chosen = sc.learner.current_slot();
                        let outcome = sc.own.take().unwrap_or(OwnOutcome::Failure);
                        sc.learner.on_schedule_end(outcome, &self.idle, &mut st.rng);
                        obs.on_schedule(&EventRecord {
                            station: st.id,
                            schedule_index: sc.index,
                            chosen_slot: chosen,
                            outcome,
                            schedule_len: len,
                            end_slot: t,
                            end_us: now,
                        });
                        let next_len = match &mut sc.adapt {
                            StationAdapt::Fixed => len,
                            StationAdapt::AccessPoint => announced.unwrap_or(len),
                            StationAdapt::Alzc(a) => a.adapt(self.idle.len()),
                            StationAdapt::Almac(a) => {
                                let Adaptation::Almac { table, .. } = &self.config.adaptation else {
                                    unreachable!("A-L-MAC state only exists under A-L-MAC adaptation")
                                };
                                a.adapt(&mut sc.learner, outcome, table)?
                            }
                        };
                        if next_len != sc.learner.schedule_len() {
                            sc.learner.resize(next_len);
                        }
                        if self.config.adaptation.uses_base() {
                            sc.txop = (next_len / self.config.slots) as u32;
                        }
                        self.history.ensure(next_len, t + 1);
                        sc.start = t + 1;
                        sc.index += 1;
                    }
                }
            }
            if delivered > 0 || dropped {
                let head = st.queue.head_since();
                st.queue.pop(delivered.max(1) as usize, now, &mut self.popped);
                for &arrival in &self.popped {
                    obs.on_delivery(&Delivery {
                        station: st.id,
                        arrival_us: arrival,
                        head_us: head,
                        done_us: now,
                        dropped,
                    });
                }
                if dropped {
                    st.dropped += 1;
                } else {
                    st.delivered += delivered as u64;
                }
            }
            st.queue.arrive_until(now, &mut st.traffic_rng);
        }
        self.slot += 1;
        Ok(class)
    }

    pub fn horizon_reached(&self, horizon: Horizon) -> bool {
        match horizon {
            Horizon::Slots(n) => self.slot >= n,
            Horizon::Seconds(s) => self.clock >= s * 1e6,
        }
    }

    /// Steps until `horizon`.
    pub fn run_for<O: Observer + ?Sized>(&mut self, horizon: Horizon, obs: &mut O) -> Result<()> {
        while !self.horizon_reached(horizon) {
            self.step(obs)?;
        }
        Ok(())
    }

    /// Steps until `done` holds or `horizon` is reached; returns whether
    /// `done` fired.
    pub fn run_until<O, F>(&mut self, horizon: Horizon, obs: &mut O, mut done: F) -> Result<bool>
    where
        O: Observer + ?Sized,
        F: FnMut(&Self, &O) -> bool,
    {
        while !self.horizon_reached(horizon) {
            self.step(obs)?;
            if done(self, obs) {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Runs `config` to its horizon and records the full trace.
pub fn run(config: &SimConfig) -> Result<Trace> {
    let mut sim = Simulator::new(config.clone())?;
    let mut trace = Trace::default();
    sim.run_for(config.horizon, &mut trace)?;
    Ok(trace)
}
