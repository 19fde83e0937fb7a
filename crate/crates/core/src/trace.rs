//! What the engine reports while it runs, and CSV export of it.

use std::io::Write;

use crate::error::{Error, Result};
use crate::phy::SlotClass;
use crate::protocol::OwnOutcome;

/// One slot as seen by observers. Station ids are 1-based.
#[derive(Clone, Copy, Debug)]
pub struct SlotView<'a> {
    pub index: u64,
    pub start_us: f64,
    pub duration_us: f64,
    pub class: SlotClass,
    pub transmitters: &'a [u32],
}

/// End of one station-local schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct EventRecord {
    pub station: u32,
    pub schedule_index: u64,
    pub chosen_slot: usize,
    pub outcome: OwnOutcome,
    /// Length of the schedule that just ended.
    pub schedule_len: usize,
    /// Global index of the schedule's last slot.
    pub end_slot: u64,
    pub end_us: f64,
}

/// A packet leaving a queue, delivered or dropped after the retry limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Delivery {
    pub station: u32,
    pub arrival_us: f64,
    pub head_us: f64,
    pub done_us: f64,
    pub dropped: bool,
}

impl Delivery {
    pub fn access_delay(&self) -> f64 {
        self.done_us - self.head_us
    }
}

pub trait Observer {
    fn on_slot(&mut self, _slot: &SlotView<'_>) {}
    fn on_schedule(&mut self, _event: &EventRecord) {}
    fn on_delivery(&mut self, _delivery: &Delivery) {}
}

impl Observer for () {}

impl<O: Observer + ?Sized> Observer for &mut O {
    fn on_slot(&mut self, slot: &SlotView<'_>) {
        (**self).on_slot(slot)
    }
    fn on_schedule(&mut self, event: &EventRecord) {
        (**self).on_schedule(event)
    }
    fn on_delivery(&mut self, delivery: &Delivery) {
        (**self).on_delivery(delivery)
    }
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn on_slot(&mut self, slot: &SlotView<'_>) {
        self.0.on_slot(slot);
        self.1.on_slot(slot);
    }
    fn on_schedule(&mut self, event: &EventRecord) {
        self.0.on_schedule(event);
        self.1.on_schedule(event);
    }
    fn on_delivery(&mut self, delivery: &Delivery) {
        self.0.on_delivery(delivery);
        self.1.on_delivery(delivery);
    }
}

/// Owned copy of a [`SlotView`].
#[derive(Clone, Debug, PartialEq)]
pub struct SlotRecord {
    pub index: u64,
    pub start_us: f64,
    pub duration_us: f64,
    pub class: SlotClass,
    pub transmitters: Vec<u32>,
}

impl SlotRecord {
    pub fn end_us(&self) -> f64 {
        self.start_us + self.duration_us
    }
}

/// Records everything.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub slots: Vec<SlotRecord>,
    pub events: Vec<EventRecord>,
    pub deliveries: Vec<Delivery>,
}

impl Observer for Trace {
    fn on_slot(&mut self, s: &SlotView<'_>) {
        self.slots.push(SlotRecord {
            index: s.index,
            start_us: s.start_us,
            duration_us: s.duration_us,
            class: s.class,
            transmitters: s.transmitters.to_vec(),
        });
    }
    fn on_schedule(&mut self, e: &EventRecord) {
        self.events.push(e.clone());
    }
    fn on_delivery(&mut self, d: &Delivery) {
        self.deliveries.push(*d);
    }
}

pub fn class_name(class: SlotClass) -> &'static str {
    match class {
        SlotClass::Idle => "idle",
        SlotClass::Success { .. } => "success",
        SlotClass::Collision => "collision",
        SlotClass::Error => "error",
    }
}

fn outcome_name(o: OwnOutcome) -> &'static str {
    match o {
        OwnOutcome::Success => "success",
        OwnOutcome::Failure => "failure",
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

impl Trace {
    /// Simulated time at the end of the trace, summed slot by slot.
    pub fn elapsed_us(&self) -> f64 {
        self.slots.iter().map(|s| s.duration_us).sum()
    }

    pub fn write_slots_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["slot_index", "sim_time_us", "kind", "transmitters", "duration_us"]).map_err(csv_err)?;
        for s in &self.slots {
            let tx: Vec<String> = s.transmitters.iter().map(u32::to_string).collect();
            out.write_record([
                s.index.to_string(),
                s.start_us.to_string(),
                class_name(s.class).to_string(),
                tx.join(";"),
                s.duration_us.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_events_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["station", "schedule_index", "chosen_slot", "outcome"]).map_err(csv_err)?;
        for e in &self.events {
            out.write_record([
                e.station.to_string(),
                e.schedule_index.to_string(),
                e.chosen_slot.to_string(),
                outcome_name(e.outcome).to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Trace::default();
        t.on_slot(&SlotView { index: 0, start_us: 0.0, duration_us: 20.0, class: SlotClass::Idle, transmitters: &[] });
        t.on_slot(&SlotView {
            index: 1,
            start_us: 20.0,
            duration_us: 902.5,
            class: SlotClass::Collision,
            transmitters: &[1, 3],
        });
        t.on_schedule(&EventRecord {
            station: 1,
            schedule_index: 0,
            chosen_slot: 2,
            outcome: OwnOutcome::Failure,
            schedule_len: 2,
            end_slot: 1,
            end_us: 922.5,
        });
        let mut buf = Vec::new();
        t.write_slots_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "slot_index,sim_time_us,kind,transmitters,duration_us\n0,0,idle,,20\n1,20,collision,1;3,902.5\n"
        );
        let mut buf = Vec::new();
        t.write_events_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "station,schedule_index,chosen_slot,outcome\n1,0,2,failure\n");
        assert_eq!(t.elapsed_us(), 922.5);
    }
}
