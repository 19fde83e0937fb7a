//! MAC/PHY timing for an 802.11b-like channel.
//!
//! Rates are in Mbit/s, i.e. bits per microsecond, so every derived duration
//! below comes out in microseconds.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

const ACK_BODY_BYTES: u64 = 14;

#[derive(Clone, Debug, PartialEq)]
pub struct PhyParams<T = f64> {
    pub data_rate: T,
    pub basic_rate: T,
    pub phy_header_bytes: u64,
    pub mac_header_bytes: u64,
    pub payload_bytes: u64,
    pub sifs: T,
    pub difs: T,
    /// Idle slot time.
    pub sigma: T,
}

impl<T: Scalar> PhyParams<T> {
    /// 11 Mbit/s 802.11b-style channel with a 1020-byte payload.
    pub fn table() -> Self {
        Self {
            data_rate: T::from_len(11),
            basic_rate: T::from_len(11),
            phy_header_bytes: 24,
            mac_header_bytes: 32,
            payload_bytes: 1020,
            sifs: T::from_len(10),
            difs: T::from_len(50),
            sigma: T::from_len(20),
        }
    }

    /// Same channel carrying `payload` bytes per frame.
    pub fn with_payload(mut self, payload: u64) -> Self {
        self.payload_bytes = payload;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_rate <= T::zero() {
            return Err(invalid("data_rate", format!("{:?}", self.data_rate), "must be positive"));
        }
        if self.basic_rate <= T::zero() {
            return Err(invalid("basic_rate", format!("{:?}", self.basic_rate), "must be positive"));
        }
        if self.sigma <= T::zero() {
            return Err(invalid("sigma", format!("{:?}", self.sigma), "must be positive"));
        }
        if self.sifs < T::zero() || self.difs < T::zero() {
            return Err(invalid("sifs/difs", format!("{:?}/{:?}", self.sifs, self.difs), "must be nonnegative"));
        }
        if self.payload_bytes == 0 {
            return Err(invalid("payload_bytes", 0, "must be positive"));
        }
        Ok(())
    }

    fn bits(bytes: u64) -> T {
        T::from_count(u128::from(bytes) * 8)
    }

    /// Time spent sending the payload, `E_p`.
    pub fn payload_time(&self) -> T {
        Self::bits(self.payload_bytes) / self.data_rate.clone()
    }

    pub fn header_time(&self) -> T {
        Self::bits(self.mac_header_bytes) / self.data_rate.clone()
            + Self::bits(self.phy_header_bytes) / self.basic_rate.clone()
    }

    pub fn ack_time(&self) -> T {
        (Self::bits(self.mac_header_bytes) + Self::bits(ACK_BODY_BYTES)) / self.data_rate.clone()
    }

    /// One packet/ACK exchange without the leading DIFS and slot.
    fn exchange(&self) -> T {
        self.header_time() + self.payload_time() + self.sifs.clone() + self.ack_time()
    }

    /// Successful slot carrying `packets` packet/ACK pairs (TXOP burst).
    pub fn success_time(&self, packets: u32) -> T {
        self.difs.clone() + self.sigma.clone() + T::from_len(packets as usize) * self.exchange()
    }

    /// `T_S`: successful slot with one packet.
    pub fn t_s(&self) -> T {
        self.success_time(1)
    }

    /// `T_C`: collision slot.
    pub fn t_c(&self) -> T {
        self.difs.clone() + self.sigma.clone() + self.header_time() + self.payload_time() + self.difs.clone()
    }
}

impl Default for PhyParams<f64> {
    fn default() -> Self {
        Self::table()
    }
}

/// What the medium did during one MAC slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotClass {
    Idle,
    Success { packets: u32 },
    Collision,
    Error,
}

/// Duration of a slot. A channel-errored frame holds the medium like a
/// collision (no ACK follows).
pub fn slot_duration<T: Scalar>(class: SlotClass, phy: &PhyParams<T>) -> Result<T> {
    match class {
        SlotClass::Idle => Ok(phy.sigma.clone()),
        SlotClass::Collision | SlotClass::Error => Ok(phy.t_c()),
        SlotClass::Success { packets: 0 } => Err(invalid("packets", 0, "a success carries at least one packet")),
        SlotClass::Success { packets } => Ok(phy.success_time(packets)),
    }
}
