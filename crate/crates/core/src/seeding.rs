//! Deterministic random streams.
//!
//! Every station owns its own ChaCha stream keyed by the run seed and its
//! index, so adding a station never shifts another station's draws.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CHANNEL_STREAM: u64 = 0;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Protocol decisions of station `index` (0-based).
pub fn station_rng(seed: u64, index: usize) -> ChaCha8Rng {
    stream_rng(seed, 2 + 2 * index as u64)
}

/// Packet arrivals of station `index`.
pub fn traffic_rng(seed: u64, index: usize) -> ChaCha8Rng {
    stream_rng(seed, 3 + 2 * index as u64)
}

/// Frame-error draws.
pub fn channel_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, CHANNEL_STREAM)
}

/// Seed of replication `i` under `base`; replication `i` never depends on how
/// many others are run.
pub fn replication_seed(base: u64, i: u64) -> u64 {
    stream_rng(base, i).next_u64()
}
