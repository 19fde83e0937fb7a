//! The non-scenario subcommands and the file layout they write.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use lmac_core::adapt::FTable;
use lmac_core::markov::{build_chain, lambda_star_closed, mean_collision_schedules, second_eigenvalue};
use lmac_core::metrics::{RunMetrics, RunRecorder};
use lmac_core::seeding::replication_seed;
use lmac_core::trace::Trace;
use lmac_core::Simulator;
use rayon::prelude::*;

use crate::config::{AdaptationKind, Config};
use crate::scenario::{Result, RunRow, ScenarioReport};

pub fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes the effective configurations next to the data they produced,
/// each headed by its hash.
pub fn write_echo(cfgs: &[&Config], dir: &Path, name: &str) -> Result<()> {
    let mut f = create(dir, name)?;
    for (i, cfg) in cfgs.iter().enumerate() {
        if i > 0 {
            writeln!(f)?;
        }
        writeln!(f, "# config_hash = {}", cfg.hash())?;
        f.write_all(cfg.echo().as_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Writes `<stem>.csv`, `<stem>_summary.csv` and `<stem>_config.txt`.
pub fn write_report(report: &ScenarioReport, cfgs: &[&Config], dir: &Path, stem: &str) -> Result<()> {
    let mut runs = create(dir, &format!("{stem}.csv"))?;
    report.write_runs_csv(&mut runs)?;
    runs.flush()?;
    let mut summary = create(dir, &format!("{stem}_summary.csv"))?;
    report.write_summary_csv(&mut summary)?;
    summary.flush()?;
    write_echo(cfgs, dir, &format!("{stem}_config.txt"))
}

/// Plain replicated runs of the configured network. The slot trace and
/// event log of the first replication are kept.
pub fn sim(cfg: &Config) -> Result<(ScenarioReport, Trace)> {
    let table = match cfg.adaptation {
        AdaptationKind::Almac => Some(Arc::new(cfg.load_ftable()?)),
        _ => None,
    };
    let runs: Vec<(RunRow, Option<Trace>)> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| {
            let mut sim = cfg.sim_config(cfg.protocol, cfg.stations, replication_seed(cfg.seed, i));
            if let Some(t) = &table {
                sim = Config::with_ftable(sim, t);
            }
            let mut engine = Simulator::new(sim.clone())?;
            let mut rec = RunRecorder::for_config(&sim);
            let trace = if i == 0 {
                let mut trace = Trace::default();
                engine.run_for(sim.horizon, &mut (&mut rec, &mut trace))?;
                Some(trace)
            } else {
                engine.run_for(sim.horizon, &mut rec)?;
                None
            };
            let metrics = RunMetrics::from_recorder(&rec, &engine)?;
            let row = RunRow { point: Vec::new(), replication: i, config_hash: cfg.hash(), metrics, extra: Vec::new() };
            Ok((row, trace))
        })
        .collect::<Result<_>>()?;
    let mut trace = None;
    let mut rows = Vec::with_capacity(runs.len());
    for (row, t) in runs {
        rows.push(row);
        trace = trace.or(t);
    }
    let report = ScenarioReport { name: "sim".into(), seed: cfg.seed, runs: rows };
    Ok((report, trace.unwrap_or_default()))
}

pub fn write_sim(report: &ScenarioReport, trace: &Trace, cfg: &Config, dir: &Path) -> Result<()> {
    let mut f = create(dir, "trace.csv")?;
    trace.write_slots_csv(&mut f)?;
    f.flush()?;
    let mut f = create(dir, "events.csv")?;
    trace.write_events_csv(&mut f)?;
    f.flush()?;
    let mut f = create(dir, "metrics.csv")?;
    report.write_runs_csv(&mut f)?;
    f.flush()?;
    write_echo(&[cfg], dir, "config.txt")
}

/// One point of the L-ZC chain sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovRow {
    pub slots: usize,
    pub stations: usize,
    pub gamma: f64,
    pub lambda_closed: f64,
    pub lambda_numeric: f64,
    /// Colliding-station count of the block with the largest eigenvalue.
    pub max_block: usize,
    pub e_schedules: f64,
}

impl MarkovRow {
    /// The dominant block is the two-station one, as the closed form assumes.
    pub fn closed_form_block(&self) -> bool {
        self.max_block == 2
    }
}

/// Chain results over `markov_slots x markov_stations x markov_gammas`,
/// skipping pairs with `N > C` or `N < 2`.
pub fn markov(cfg: &Config) -> Result<Vec<MarkovRow>> {
    let mut grid = Vec::new();
    for &c in &cfg.markov_slots {
        for &n in &cfg.markov_stations {
            if n >= 2 && n <= c {
                grid.extend(cfg.markov_gammas.iter().map(|&g| (c, n, g)));
            }
        }
    }
    let rows = grid
        .into_par_iter()
        .map(|(c, n, g)| {
            let chain = build_chain::<f64>(c, n, g)?;
            let sub = second_eigenvalue(&chain);
            Ok(MarkovRow {
                slots: c,
                stations: n,
                gamma: g,
                lambda_closed: lambda_star_closed(c, n, &g)?,
                lambda_numeric: sub.value,
                max_block: sub.maximiser,
                e_schedules: mean_collision_schedules(&chain)?,
            })
        })
        .collect::<std::result::Result<Vec<_>, lmac_core::Error>>()?;
    Ok(rows)
}

pub fn write_markov<W: Write>(rows: &[MarkovRow], cfg: &Config, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "C",
        "N",
        "gamma",
        "lambda_closed",
        "lambda_numeric",
        "E_schedules",
        "max_block",
        "config_hash",
    ])?;
    let hash = cfg.hash();
    for r in rows {
        out.write_record([
            r.slots.to_string(),
            r.stations.to_string(),
            r.gamma.to_string(),
            r.lambda_closed.to_string(),
            r.lambda_numeric.to_string(),
            r.e_schedules.to_string(),
            r.max_block.to_string(),
            hash.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Builds the f-table for the configured lengths.
pub fn ftable(cfg: &Config) -> Result<FTable> {
    Ok(cfg.build_ftable()?)
}
