use std::fmt;

use crate::error::{Error, Result};

/// A configuration of collisions within one schedule: the occupancy of
/// every slot holding two or more stations, sorted ascending.
///
/// Slots are unlabelled, so two schedules with the same multiset of
/// collision sizes are the same Markov state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CollisionState {
    parts: Vec<u32>,
}

impl CollisionState {
    /// Canonicalises `parts`; every part must be at least 2.
    pub fn new(mut parts: Vec<u32>) -> Result<Self> {
        if parts.is_empty() || parts.iter().any(|&p| p < 2) {
            return Err(Error::InconsistentState { state: parts, stations: 0, slots: 0 });
        }
        parts.sort_unstable();
        Ok(Self { parts })
    }

    pub(crate) fn from_sorted(parts: Vec<u32>) -> Self {
        debug_assert!(parts.windows(2).all(|w| w[0] <= w[1]));
        debug_assert!(parts.iter().all(|&p| p >= 2));
        Self { parts }
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// Number of colliding stations.
    pub fn colliding_stations(&self) -> usize {
        self.parts.iter().map(|&p| p as usize).sum()
    }

    /// Number of slots carrying a collision.
    pub fn collision_slots(&self) -> usize {
        self.parts.len()
    }

    /// Idle slots in a schedule of `slots` shared by `stations`.
    pub fn idle_slots(&self, stations: usize, slots: usize) -> Option<usize> {
        (slots + self.colliding_stations()).checked_sub(stations + self.collision_slots())
    }

    pub(crate) fn check(&self, stations: usize, slots: usize) -> Result<usize> {
        let err = || Error::InconsistentState { state: self.parts.clone(), stations, slots };
        if self.colliding_stations() > stations || stations > slots {
            return Err(err());
        }
        self.idle_slots(stations, slots).ok_or_else(err)
    }
}

impl fmt::Display for CollisionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// All partitions of `total` into parts of at least `min_part`, each sorted
/// ascending, in lexicographic order.
pub fn partitions(total: u32, min_part: u32) -> Vec<Vec<u32>> {
    fn go(rest: u32, lo: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for p in lo..=rest {
            // the remainder must itself be zero or usable as parts >= p
            if rest - p != 0 && rest - p < p {
                continue;
            }
            cur.push(p);
            go(rest - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if total == 0 {
        out.push(Vec::new());
        return out;
    }
    go(total, min_part.max(1), &mut Vec::new(), &mut out);
    out
}

/// Collision states with exactly `colliding` colliding stations.
pub fn states_with(colliding: u32) -> Vec<CollisionState> {
    if colliding < 2 {
        return Vec::new();
    }
    partitions(colliding, 2).into_iter().map(CollisionState::from_sorted).collect()
}

/// Every collision state reachable by `stations` stations: all partitions of
/// 2..=N into parts of at least two, grouped by descending colliding count.
pub fn enumerate_states(stations: usize) -> Vec<CollisionState> {
    (2..=stations as u32).rev().flat_map(states_with).collect()
}
