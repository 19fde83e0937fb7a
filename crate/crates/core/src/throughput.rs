//! Throughput of a fixed-length schedule once stations have settled.

use crate::error::{invalid, Result};
use crate::phy::PhyParams;
use crate::scalar::{powi, Scalar};

/// How the `C` slots of one schedule split between successes, collisions and
/// idle slots.
#[derive(Clone, Debug, PartialEq)]
pub struct SchedulePartition<T> {
    pub success: T,
    pub collision: T,
    pub idle: T,
}

impl<T: Scalar> SchedulePartition<T> {
    pub fn total(&self) -> T {
        self.success.clone() + self.collision.clone() + self.idle.clone()
    }

    /// Payload airtime over elapsed time for one schedule with this split.
    pub fn throughput(&self, phy: &PhyParams<T>) -> T {
        let busy = self.success.clone() * phy.t_s()
            + self.collision.clone() * phy.t_c()
            + self.idle.clone() * phy.sigma.clone();
        self.success.clone() * phy.payload_time() / busy
    }
}

/// Split of a collision-free schedule with `N <= C` stations.
pub fn partition_underloaded<T: Scalar>(stations: usize, slots: usize) -> Result<SchedulePartition<T>> {
    if stations == 0 || stations > slots {
        return Err(invalid("stations", stations, "need 1 <= N <= C"));
    }
    Ok(SchedulePartition { success: T::from_len(stations), collision: T::zero(), idle: T::from_len(slots - stations) })
}

/// Expected split with `N > C`: each of the `N - C` surplus stations lands
/// uniformly at random and spoils the slot it hits.
pub fn partition_overloaded<T: Scalar>(stations: usize, slots: usize) -> Result<SchedulePartition<T>> {
    let collision = expected_collision_slots::<T>(stations, slots)?;
    Ok(SchedulePartition { success: T::from_len(slots) - collision.clone(), collision, idle: T::zero() })
}

/// `S = N E_p / (N T_S + (C - N) sigma)`.
pub fn throughput_underloaded<T: Scalar>(stations: usize, slots: usize, phy: &PhyParams<T>) -> Result<T> {
    Ok(partition_underloaded::<T>(stations, slots)?.throughput(phy))
}

/// `E(C_col) = C (1 - (1 - 1/C)^(N - C))`: occupied bins after throwing
/// `N - C` balls into `C` bins.
pub fn expected_collision_slots<T: Scalar>(stations: usize, slots: usize) -> Result<T> {
    if slots == 0 || stations <= slots {
        return Err(invalid("stations", stations, "overloaded regime needs N > C"));
    }
    let c = T::from_len(slots);
    let miss = T::one() - T::one() / c.clone();
    Ok(c * (T::one() - powi(&miss, stations - slots)))
}

/// `S = C_suc E_p / (C_suc T_S + C_col T_C)` with `C_col` from
/// [`expected_collision_slots`].
pub fn throughput_overloaded<T: Scalar>(stations: usize, slots: usize, phy: &PhyParams<T>) -> Result<T> {
    Ok(partition_overloaded::<T>(stations, slots)?.throughput(phy))
}

/// Either regime, chosen by comparing `N` with `C`.
pub fn throughput_model<T: Scalar>(stations: usize, slots: usize, phy: &PhyParams<T>) -> Result<T> {
    if stations > slots {
        throughput_overloaded(stations, slots, phy)
    } else {
        throughput_underloaded(stations, slots, phy)
    }
}
