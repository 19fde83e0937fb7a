//! Slot-level simulation and analysis of learning, collision-free WLAN MAC
//! protocols (L-BEB, ZC, L-ZC, L-MAC) alongside 802.11 DCF.

pub mod adapt;
pub mod engine;
pub mod error;
pub mod markov;
pub mod metrics;
pub mod phy;
pub mod protocol;
pub mod scalar;
pub mod schedule_sim;
pub mod seeding;
pub mod throughput;
pub mod trace;
pub mod traffic;

pub use engine::{run, Adaptation, Horizon, Join, JoinTime, SimConfig, Simulator, StationGroup};
pub use error::{Error, Result};
pub use protocol::{Gamma, OwnOutcome, ProtocolKind, ProtocolParams};
pub use scalar::Scalar;

/// Exact rational scalar used for oracle computations.
pub type Exact = num_rational::BigRational;

pub type ChainF64 = markov::ChainModel<f64>;
pub type ExactChain = markov::ChainModel<Exact>;
pub type Phy = phy::PhyParams<f64>;
pub type ExactPhy = phy::PhyParams<Exact>;
