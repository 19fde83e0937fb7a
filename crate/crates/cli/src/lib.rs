//! Configuration, experiment scenarios and CSV reporting on top of
//! `lmac_core`.

pub mod commands;
pub mod config;
pub mod reproduce;
pub mod scenario;

pub use config::{Config, ConfigError, Diagnostic};
pub use scenario::{scenario, ScenarioError, ScenarioKind, ScenarioReport};
