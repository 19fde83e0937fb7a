//! One-schedule transition probabilities of the L-ZC collision chain.
//!
//! Three independent routes are provided:
//!
//! * [`transition_row_brute`] walks every joint decision of every colliding
//!   station. Exponential in the number of colliding stations; a test oracle.
//! * [`transition_row_exact`] walks every per-slot stay count and every
//!   occupancy pattern of the movers over the idle slots, weighting each by
//!   its multiplicity. Exact and fast enough for sixteen stations.
//! * [`transition_prob_formula`] evaluates the closed sum over fixed-slot
//!   subsets and injections for transitions that keep the number of colliding
//!   stations unchanged (the diagonal blocks of the chain).
//!
//! Dynamics: every colliding station independently stays in its slot with
//! probability `gamma` or moves to one of the `n_I` idle slots of the last
//! schedule, each with probability `(1 - gamma) / n_I`. Stations that did not
//! collide keep their slot and nobody can move into a busy slot.

use std::collections::BTreeMap;

use super::state::{partitions, CollisionState};
use crate::error::{Error, Result};
use crate::scalar::{binomial, checked_pow, falling, multinomial, powi, symmetry_count, Scalar};

/// Distribution over the next state; `None` is the collision-free
/// (absorbing) outcome.
pub type Row<T> = BTreeMap<Option<CollisionState>, T>;

fn merge_state(a: &[u32], b: &[u32]) -> Option<CollisionState> {
    if a.is_empty() && b.is_empty() {
        return None;
    }
    let mut parts: Vec<u32> = a.iter().chain(b).copied().collect();
    parts.sort_unstable();
    Some(CollisionState::from_sorted(parts))
}

fn add<T: Scalar>(row: &mut Row<T>, key: Option<CollisionState>, p: T) {
    match row.get_mut(&key) {
        Some(v) => *v = v.clone() + p,
        None => {
            row.insert(key, p);
        }
    }
}

/// Brute-force oracle: every colliding station picks "stay" or one of the idle
/// slots, giving `(1 + n_I)^{N_C}` joint outcomes.
pub fn transition_row_brute<T: Scalar>(
    from: &CollisionState,
    slots: usize,
    stations: usize,
    gamma: &T,
) -> Result<Row<T>> {
    let idle = from.check(stations, slots)?;
    let owners: Vec<usize> =
        from.parts().iter().enumerate().flat_map(|(slot, &k)| std::iter::repeat_n(slot, k as usize)).collect();
    let choices = idle + 1;
    let total = checked_pow(choices as u64, owners.len() as u32)?;
    if total > 50_000_000 {
        return Err(Error::StateSpaceTooLarge(stations));
    }

    // counts[(state, stayers)] = number of joint outcomes
    let mut counts: BTreeMap<(Option<CollisionState>, usize), u128> = BTreeMap::new();
    let mut digits = vec![0usize; owners.len()];
    let mut occupancy = vec![0u32; from.collision_slots() + idle];
    for _ in 0..total {
        occupancy.iter_mut().for_each(|o| *o = 0);
        let mut stayers = 0;
        for (station, &d) in digits.iter().enumerate() {
            if d == 0 {
                occupancy[owners[station]] += 1;
                stayers += 1;
            } else {
                occupancy[from.collision_slots() + d - 1] += 1;
            }
        }
        let mut parts: Vec<u32> = occupancy.iter().copied().filter(|&o| o >= 2).collect();
        parts.sort_unstable();
        let key = (!parts.is_empty()).then(|| CollisionState::from_sorted(parts));
        *counts.entry((key, stayers)).or_insert(0) += 1;

        for d in digits.iter_mut() {
            *d += 1;
            if *d < choices {
                break;
            }
            *d = 0;
        }
    }

    let n = from.colliding_stations();
    let move_p = if idle == 0 { T::zero() } else { (T::one() - gamma.clone()) / T::from_len(idle) };
    let mut row = Row::new();
    for ((key, stay), count) in counts {
        let p = T::from_count(count) * powi(gamma, stay) * powi(&move_p, n - stay);
        add(&mut row, key, p);
    }
    row.retain(|_, p| !p.is_zero());
    Ok(row)
}

/// Distribution of the collision pattern left by `movers` stations thrown
/// uniformly into `idle` slots, keyed by the sorted occupancies >= 2.
fn mover_patterns<T: Scalar>(movers: u32, idle: usize) -> Result<Vec<(Vec<u32>, T)>> {
    if movers == 0 {
        return Ok(vec![(Vec::new(), T::one())]);
    }
    let denom = T::from_count(checked_pow(idle as u64, movers)?);
    let mut acc: BTreeMap<Vec<u32>, T> = BTreeMap::new();
    for parts in partitions(movers, 1) {
        if parts.len() > idle {
            continue;
        }
        // labelled-station assignments realising this occupancy pattern
        let placements = falling(idle as u64, parts.len() as u64)? / symmetry_count(&parts);
        let ways = multinomial(&parts)?.checked_mul(placements).ok_or(Error::Overflow)?;
        let key: Vec<u32> = parts.into_iter().filter(|&p| p >= 2).collect();
        let p = T::from_count(ways) / denom.clone();
        match acc.get_mut(&key) {
            Some(v) => *v = v.clone() + p,
            None => {
                acc.insert(key, p);
            }
        }
    }
    Ok(acc.into_iter().collect())
}

/// Exact next-state distribution from `from`.
pub fn transition_row_exact<T: Scalar>(
    from: &CollisionState,
    slots: usize,
    stations: usize,
    gamma: &T,
) -> Result<Row<T>> {
    let idle = from.check(stations, slots)?;
    let stay_p = gamma.clone();
    let move_p = T::one() - gamma.clone();

    // (surviving collision sizes, number of movers) -> probability
    let mut stays: BTreeMap<(Vec<u32>, u32), T> = BTreeMap::new();
    stays.insert((Vec::new(), 0), T::one());
    for &k in from.parts() {
        let mut next: BTreeMap<(Vec<u32>, u32), T> = BTreeMap::new();
        for ((kept, movers), w) in &stays {
            for x in 0..=k {
                let p = w.clone()
                    * T::from_count(binomial(u64::from(k), u64::from(x)))
                    * powi(&stay_p, x as usize)
                    * powi(&move_p, (k - x) as usize);
                if p.is_zero() {
                    continue;
                }
                let mut kept = kept.clone();
                if x >= 2 {
                    kept.push(x);
                    kept.sort_unstable();
                }
                let key = (kept, movers + k - x);
                match next.get_mut(&key) {
                    Some(v) => *v = v.clone() + p,
                    None => {
                        next.insert(key, p);
                    }
                }
            }
        }
        stays = next;
    }

    let mut cache: BTreeMap<u32, Vec<(Vec<u32>, T)>> = BTreeMap::new();
    let mut row = Row::new();
    for ((kept, movers), w) in stays {
        if movers > 0 && idle == 0 {
            // nowhere to go; such outcomes carry zero weight unless gamma = 1
            continue;
        }
        if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(movers) {
            e.insert(mover_patterns(movers, idle)?);
        }
        for (pattern, p) in &cache[&movers] {
            add(&mut row, merge_state(&kept, pattern), w.clone() * p.clone());
        }
    }
    row.retain(|_, p| !p.is_zero());
    Ok(row)
}

/// Single entry of the exact transition law; `to = None` is absorption.
pub fn transition_prob_exact<T: Scalar>(
    from: &CollisionState,
    to: Option<&CollisionState>,
    slots: usize,
    stations: usize,
    gamma: &T,
) -> Result<T> {
    if let Some(to) = to {
        to.check(stations, slots)?;
    }
    let row = transition_row_exact(from, slots, stations, gamma)?;
    Ok(row.get(&to.cloned()).cloned().unwrap_or_else(T::zero))
}

/// Closed-form transition probability between two states with the same
/// number of colliding stations.
///
/// Sums over the set of source slots that keep some stations fixed and over
/// the one-to-one matchings of those slots onto target collision slots no
/// larger than the source slot. Unmatched target slots are filled by movers
/// from the idle slots; the result is divided by the number of relabellings
/// of the target that leave it unchanged.
pub fn transition_prob_formula<T: Scalar>(
    from: &CollisionState,
    to: &CollisionState,
    slots: usize,
    stations: usize,
    gamma: &T,
) -> Result<T> {
    if from.colliding_stations() != to.colliding_stations() {
        return Err(Error::BlockMismatch { from: from.parts().to_vec(), to: to.parts().to_vec() });
    }
    let idle = from.check(stations, slots)?;
    to.check(stations, slots)?;
    let src = from.parts();
    let dst = to.parts();
    let relabellings = T::from_count(symmetry_count(dst));
    let jump = if idle == 0 { T::zero() } else { (T::one() - gamma.clone()) / T::from_len(idle) };

    struct Walk<'a, T> {
        src: &'a [u32],
        dst: &'a [u32],
        idle: usize,
        gamma: &'a T,
        jump: &'a T,
        used: Vec<bool>,
        total: T,
    }

    impl<T: Scalar> Walk<'_, T> {
        fn visit(&mut self, j: usize, fixed: usize, ways: u128, stayers: u32) -> Result<()> {
            if j == self.src.len() {
                let free: Vec<u32> = self.dst.iter().zip(&self.used).filter(|(_, &u)| !u).map(|(&l, _)| l).collect();
                let movers: u32 = free.iter().sum();
                let placements = falling(self.idle as u64, (self.dst.len() - fixed) as u64)?;
                if placements == 0 {
                    return Ok(());
                }
                let count = ways
                    .checked_mul(multinomial(&free)?)
                    .and_then(|c| c.checked_mul(placements))
                    .ok_or(Error::Overflow)?;
                let term = T::from_count(count) * powi(self.gamma, stayers as usize) * powi(self.jump, movers as usize);
                self.total = self.total.clone() + term;
                return Ok(());
            }
            // slot j keeps no station
            self.visit(j + 1, fixed, ways, stayers)?;
            // slot j keeps dst[l] of its src[j] stations
            for l in 0..self.dst.len() {
                if self.used[l] || self.dst[l] > self.src[j] {
                    continue;
                }
                self.used[l] = true;
                let w = ways
                    .checked_mul(binomial(u64::from(self.src[j]), u64::from(self.dst[l])))
                    .ok_or(Error::Overflow)?;
                self.visit(j + 1, fixed + 1, w, stayers + self.dst[l])?;
                self.used[l] = false;
            }
            Ok(())
        }
    }

    let mut walk = Walk { src, dst, idle, gamma, jump: &jump, used: vec![false; dst.len()], total: T::zero() };
    walk.visit(0, 0, 1, 0)?;
    Ok(walk.total / relabellings)
}

/// Distribution of the first schedule when every station picks a slot
/// uniformly at random.
///
/// For a state with `N_C` colliding stations in `n_C` slots the number of
/// assignments is `C(C, N-N_C) * P(N, N-N_C) * P(C-N+N_C, n_C) / R *
/// multinomial(N_C; I_1, ...)` out of `C^N`.
pub fn initial_probs<T: Scalar>(slots: usize, stations: usize) -> Result<Row<T>> {
    if stations > slots {
        return Err(crate::error::invalid("stations", stations, "must not exceed the schedule length"));
    }
    let (c, n) = (slots as u64, stations as u64);
    let denom = T::from_count(checked_pow(c, stations as u32)?);
    let mut row = Row::new();
    let free = falling(c, n)?;
    if free > 0 {
        row.insert(None, T::from_count(free) / denom.clone());
    }
    for nc in 2..=stations as u32 {
        let clean = n - u64::from(nc);
        for parts in partitions(nc, 2) {
            let collision_slots = parts.len() as u64;
            let count = [
                binomial(c, clean),
                falling(n, clean)?,
                falling(c - clean, collision_slots)? / symmetry_count(&parts),
                multinomial(&parts)?,
            ]
            .into_iter()
            .try_fold(1u128, |acc, f| acc.checked_mul(f).ok_or(Error::Overflow))?;
            if count == 0 {
                continue;
            }
            row.insert(Some(CollisionState::from_sorted(parts)), T::from_count(count) / denom.clone());
        }
    }
    Ok(row)
}

/// Brute-force check of [`initial_probs`]: enumerate all `C^N` slot choices.
pub fn initial_probs_brute<T: Scalar>(slots: usize, stations: usize) -> Result<Row<T>> {
    let total = checked_pow(slots as u64, stations as u32)?;
    if total > 50_000_000 {
        return Err(Error::StateSpaceTooLarge(stations));
    }
    let mut counts: BTreeMap<Option<CollisionState>, u128> = BTreeMap::new();
    let mut digits = vec![0usize; stations];
    let mut occupancy = vec![0u32; slots];
    for _ in 0..total {
        occupancy.iter_mut().for_each(|o| *o = 0);
        for &d in &digits {
            occupancy[d] += 1;
        }
        let mut parts: Vec<u32> = occupancy.iter().copied().filter(|&o| o >= 2).collect();
        parts.sort_unstable();
        let key = (!parts.is_empty()).then(|| CollisionState::from_sorted(parts));
        *counts.entry(key).or_insert(0) += 1;
        for d in digits.iter_mut() {
            *d += 1;
            if *d < slots {
                break;
            }
            *d = 0;
        }
    }
    let denom = T::from_count(total);
    Ok(counts.into_iter().map(|(k, c)| (k, T::from_count(c) / denom.clone())).collect())
}
