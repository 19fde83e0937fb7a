//! Every experiment family in one go, one CSV set per dataset.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use lmac_core::metrics::{achievable_rate, measure};
use lmac_core::seeding::replication_seed;
use lmac_core::traffic::TrafficModel;
use lmac_core::{ProtocolKind, SimConfig};
use rayon::prelude::*;

use crate::commands::{create, write_report};
use crate::config::Config;
use crate::scenario::{scenario, scenario_with_table, Result, RunRow, ScenarioKind, ScenarioReport};

/// Output stems written by [`reproduce_all`], in order.
pub const DATASETS: [&str; 13] = [
    "throughput_vs_stations",
    "collision_rate_vs_stations",
    "convergence_lmac_beta_vs_lbeb",
    "convergence_lzc_gamma",
    "fairness_jain_by_window",
    "achievable_rate_vs_beta",
    "convergence_vs_load",
    "throughput_model_vs_sim",
    "throughput_with_errors",
    "reconvergence_new_entrants",
    "adaptive_throughput_vs_stations",
    "mac_delay_vs_stations",
    "coexistence_with_dcf",
];

const ALL_MACS: &str = "dcf,lbeb,zc,lzc,lmac";
const LEARNING_MACS: &str = "lbeb,zc,lzc,lmac";
const STATIONS: &str = "2,4,6,8,10,12,14,16,20,24,32,40";
const ADAPTIVE_STATIONS: &str = "5,10,15,20,25,30,35,40,45,50";

/// What [`reproduce_all`] managed to write.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<String>,
    pub failed: Vec<(String, String)>,
}

fn set(pairs: &[(&'static str, &str)]) -> Vec<(&'static str, String)> {
    pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
}

/// A dataset: its runs plus every configuration that produced them.
type Made = (Vec<Config>, ScenarioReport);

fn plain(base: &Config, kind: ScenarioKind, overrides: &[(&'static str, &str)]) -> Result<Made> {
    let cfg = base.derive(&set(overrides))?;
    let report = scenario(kind, &cfg)?;
    Ok((vec![cfg], report))
}

fn dataset(base: &Config, name: &str) -> Result<Made> {
    use ScenarioKind::*;
    match name {
        "throughput_vs_stations" | "collision_rate_vs_stations" => {
            plain(base, ThroughputVsN, &[("protocols", ALL_MACS), ("stations_list", STATIONS)])
        }
        "convergence_lmac_beta_vs_lbeb" => plain(
            base,
            ConvergeSweep,
            &[("protocols", "lmac,lbeb"), ("beta_grid", "0.1,0.3,0.5,0.7,0.8,0.9,0.95,0.98,0.99")],
        ),
        "convergence_lzc_gamma" => plain(
            base,
            ConvergeSweep,
            &[("protocols", "lzc,zc"), ("gamma_grid", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")],
        ),
        "fairness_jain_by_window" => {
            plain(base, ConvergeSweep, &[("protocols", "lmac"), ("beta_grid", "0.5,0.8,0.95,0.99")])
        }
        "achievable_rate_vs_beta" => rate_region(base),
        "convergence_vs_load" => plain(
            base,
            ConvergeSweep,
            &[("protocols", LEARNING_MACS), ("stations_list", "5,6,7,8,9,10,11,12,13,14,15,16")],
        ),
        "throughput_model_vs_sim" => plain(base, ThroughputVsN, &[("protocols", "lmac"), ("stations_list", STATIONS)]),
        "throughput_with_errors" => {
            plain(base, ErrorRobustness, &[("protocols", ALL_MACS), ("error_rates", "0,0.01,0.1")])
        }
        "reconvergence_new_entrants" => plain(
            base,
            NewEntrants,
            &[("protocols", LEARNING_MACS), ("stations", "8"), ("join_list", "1,2,3,4,5,6,7,8")],
        ),
        "adaptive_throughput_vs_stations" => adaptive(base, ThroughputVsN, &[]),
        "mac_delay_vs_stations" => adaptive(base, DelayVsN, &[("traffic", "poisson")]),
        "coexistence_with_dcf" => plain(base, Coexist, &[("protocols", LEARNING_MACS), ("dcf_list", "2,4,8,12,16")]),
        other => unreachable!("no dataset called {other}"),
    }
}

/// Runs every dataset under `base` (which supplies replications, seed,
/// horizon, payload and the like) and writes them to `dir`, together with
/// an index `datasets.csv`. A failing dataset is reported there and
/// skipped; the rest are still produced.
pub fn reproduce_all(base: &Config, dir: &Path) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let mut shared: Option<Made> = None;
    for name in DATASETS {
        // The throughput runs also carry the collision rate.
        let made = match (name, &shared) {
            ("collision_rate_vs_stations", Some(m)) => Ok(m.clone()),
            _ => dataset(base, name),
        };
        let written = made.and_then(|(cfgs, report)| {
            let refs: Vec<&Config> = cfgs.iter().collect();
            write_report(&report, &refs, dir, name)?;
            if name == "throughput_vs_stations" {
                shared = Some((cfgs, report));
            }
            Ok(())
        });
        match written {
            Ok(()) => outcome.written.push(name.to_string()),
            Err(e) => outcome.failed.push((name.to_string(), e.to_string())),
        }
    }
    let mut index = create(dir, "datasets.csv")?;
    writeln!(index, "dataset,status,detail")?;
    for name in DATASETS {
        match outcome.failed.iter().find(|(n, _)| n == name) {
            Some((_, e)) => writeln!(index, "{name},failed,\"{}\"", e.replace('"', "'").replace('\n', " "))?,
            None => writeln!(index, "{name},ok,")?,
        }
    }
    index.flush()?;
    Ok(outcome)
}

/// Largest stable Poisson rate per station against `beta`, for 20 and 24
/// L-MAC stations on a 16-slot schedule.
fn rate_region(base: &Config) -> Result<Made> {
    let cfg = base.derive(&set(&[("protocol", "lmac"), ("slots", "16")]))?;
    let mut jobs = Vec::new();
    for n in [20usize, 24] {
        for beta in [0.5, 0.8, 0.9, 0.95, 0.99] {
            jobs.extend((0..cfg.replications).map(|i| (n, beta, i)));
        }
    }
    let bits = cfg.phy.payload_bytes as f64 * 8.0;
    let hash = cfg.hash();
    let runs = jobs
        .into_par_iter()
        .map(|(n, beta, i)| {
            let mut sim = cfg.sim_config(ProtocolKind::Lmac, n, replication_seed(cfg.seed, i));
            sim.params.beta = beta;
            let rate = achievable_rate(&sim, cfg.rate_high, cfg.rate_tolerance)?;
            let metrics = measure(&SimConfig { traffic: TrafficModel::poisson(rate), ..sim })?;
            Ok(RunRow {
                point: vec![("N", n.to_string()), ("beta", beta.to_string())],
                replication: i,
                config_hash: hash.clone(),
                metrics,
                extra: vec![("rate_pps", Some(rate)), ("rate_mbps", Some(rate * bits * 1e-6))],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = ScenarioReport { name: "achievable_rate_vs_beta".into(), seed: cfg.seed, runs };
    Ok((vec![cfg], report))
}

/// A-L-MAC, A-L-ZC and DCF against the number of stations, merged into
/// one report with an `adaptation` point key.
fn adaptive(base: &Config, kind: ScenarioKind, extra: &[(&'static str, &str)]) -> Result<Made> {
    let variants = [("lmac", "almac"), ("lzc", "alzc"), ("dcf", "fixed")];
    let mut cfgs = Vec::new();
    let mut runs = Vec::new();
    for (protocol, adaptation) in variants {
        let mut overrides =
            set(&[("protocol", protocol), ("adaptation", adaptation), ("stations_list", ADAPTIVE_STATIONS)]);
        overrides.extend(set(extra));
        let cfg = base.derive(&overrides)?;
        let table = match adaptation {
            "almac" => Some(Arc::new(cfg.load_ftable()?)),
            _ => None,
        };
        let mut report = scenario_with_table(kind, &cfg, table)?;
        for r in &mut report.runs {
            r.point.insert(0, ("adaptation", adaptation.to_string()));
        }
        runs.append(&mut report.runs);
        cfgs.push(cfg);
    }
    Ok((cfgs, ScenarioReport { name: kind.name().into(), seed: base.seed, runs }))
}
