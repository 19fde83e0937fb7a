//! Replicated experiments and their CSV reports.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use lmac_core::adapt::FTable;
use lmac_core::markov::{build_chain, mean_collision_schedules, MAX_STATIONS};
use lmac_core::metrics::{summarize, RunMetrics, RunRecorder, SlidingConvergence, Summary};
use lmac_core::seeding::replication_seed;
use lmac_core::throughput::throughput_model;
use lmac_core::traffic::TrafficModel;
use lmac_core::{Horizon, ProtocolKind, SimConfig, Simulator, StationGroup};
use rayon::prelude::*;

use crate::config::{AdaptationKind, Config, ConfigError};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`; expected one of {names}", names = ScenarioKind::names())]
    UnknownKind(String),
    #[error("incompatible configuration: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] lmac_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    /// True for problems with the input rather than with running it.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            ScenarioError::UnknownKind(_)
                | ScenarioError::Incompatible(_)
                | ScenarioError::Config(_)
                | ScenarioError::Core(lmac_core::Error::InvalidParam { .. })
        )
    }
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    ConvergeSweep,
    ThroughputVsN,
    DelayVsN,
    ErrorRobustness,
    NewEntrants,
    Coexist,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        Self::ConvergeSweep,
        Self::ThroughputVsN,
        Self::DelayVsN,
        Self::ErrorRobustness,
        Self::NewEntrants,
        Self::Coexist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ConvergeSweep => "converge-sweep",
            Self::ThroughputVsN => "throughput-vs-n",
            Self::DelayVsN => "delay-vs-n",
            Self::ErrorRobustness => "error-robustness",
            Self::NewEntrants => "new-entrants",
            Self::Coexist => "coexist",
        }
    }

    fn names() -> String {
        Self::ALL.map(Self::name).join(", ")
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = ScenarioError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ScenarioError::UnknownKind(s.to_string()))
    }
}

/// Named coordinates of a sweep point, in column order.
pub type Point = Vec<(&'static str, String)>;
/// Scenario-specific columns, `None` where a value is undefined.
pub type Extras = Vec<(&'static str, Option<f64>)>;

/// One replication at one configuration point.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub point: Point,
    pub replication: u64,
    pub config_hash: String,
    pub metrics: RunMetrics,
    /// Scenario-specific measurements, `None` when undefined for the run.
    pub extra: Extras,
}

impl RunRow {
    /// Numeric measurements by column name.
    pub fn values(&self) -> Vec<(String, Option<f64>)> {
        let m = &self.metrics;
        let mut v = vec![
            ("kappa_schedules".to_string(), m.kappa_schedules.map(|k| k as f64)),
            ("conv_seconds".to_string(), m.conv_seconds),
            ("thr_norm".to_string(), Some(m.thr_norm)),
            ("thr_mbps".to_string(), Some(m.thr_mbps)),
            ("coll_rate".to_string(), m.coll_rate),
            ("mean_delay_us".to_string(), m.mean_delay_us),
        ];
        v.extend(m.jain.iter().enumerate().map(|(i, j)| (format!("jain_m{}", i + 1), *j)));
        v.extend(self.extra.iter().map(|(k, x)| (k.to_string(), *x)));
        v
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values().into_iter().find(|(k, _)| k == name).and_then(|(_, v)| v)
    }
}

/// Aggregates of one configuration point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSummary {
    pub point: Point,
    pub config_hash: String,
    pub metrics: Vec<(String, Summary)>,
}

impl PointSummary {
    pub fn get(&self, name: &str) -> Option<&Summary> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, s)| s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioReport {
    pub name: String,
    pub seed: u64,
    /// Ordered by point, then replication.
    pub runs: Vec<RunRow>,
}

impl ScenarioReport {
    /// Runs grouped by point, in order of first appearance.
    pub fn points(&self) -> Vec<(Point, Vec<&RunRow>)> {
        let mut out: Vec<(Point, Vec<&RunRow>)> = Vec::new();
        for r in &self.runs {
            match out.iter_mut().find(|(p, _)| *p == r.point) {
                Some((_, rows)) => rows.push(r),
                None => out.push((r.point.clone(), vec![r])),
            }
        }
        out
    }

    /// Mean, spread and 95% interval of every measurement at every point,
    /// over the runs where it is defined.
    pub fn summary(&self) -> Vec<PointSummary> {
        self.points()
            .into_iter()
            .map(|(point, rows)| {
                let names: Vec<String> = rows[0].values().into_iter().map(|(k, _)| k).collect();
                let metrics = names
                    .into_iter()
                    .filter_map(|name| {
                        let xs: Vec<f64> = rows.iter().filter_map(|r| r.value(&name)).collect();
                        summarize(&xs).map(|s| (name, s))
                    })
                    .collect();
                PointSummary { point, config_hash: rows[0].config_hash.clone(), metrics }
            })
            .collect()
    }

    /// Summary of the point whose keys include every `(key, value)` in
    /// `filter`.
    pub fn point(&self, filter: &[(&str, &str)]) -> Option<PointSummary> {
        self.summary().into_iter().find(|p| matches_point(&p.point, filter))
    }

    pub fn write_runs_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let Some(first) = self.runs.first() else {
            out.write_record(["replication", "config_hash"].iter().chain(RunMetrics::HEADER.iter()))?;
            out.flush()?;
            return Ok(());
        };
        // Point keys are prefixed: several repeat a metrics column.
        let mut header: Vec<String> = first.point.iter().map(|(k, _)| format!("point_{k}")).collect();
        header.extend(["replication", "config_hash"].map(String::from));
        header.extend(RunMetrics::HEADER.map(String::from));
        header.extend(first.extra.iter().map(|(k, _)| k.to_string()));
        out.write_record(&header)?;
        for r in &self.runs {
            let mut row: Vec<String> = r.point.iter().map(|(_, v)| v.clone()).collect();
            row.push(r.replication.to_string());
            row.push(r.config_hash.clone());
            row.extend(r.metrics.row());
            row.extend(r.extra.iter().map(|(_, x)| x.map_or_else(String::new, |x| x.to_string())));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let summary = self.summary();
        let mut header: Vec<&str> =
            summary.first().map_or_else(Vec::new, |p| p.point.iter().map(|(k, _)| *k).collect());
        header.extend(["metric", "n", "mean", "sd", "stderr", "ci95", "seed", "config_hash"]);
        out.write_record(&header)?;
        for p in &summary {
            for (name, s) in &p.metrics {
                let mut row: Vec<String> = p.point.iter().map(|(_, v)| v.clone()).collect();
                row.extend([
                    name.clone(),
                    s.n.to_string(),
                    s.mean.to_string(),
                    s.sd.to_string(),
                    s.stderr.to_string(),
                    s.ci95.to_string(),
                    self.seed.to_string(),
                    p.config_hash.clone(),
                ]);
                out.write_record(&row)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn matches_point(point: &[(&'static str, String)], filter: &[(&str, &str)]) -> bool {
    filter.iter().all(|(k, v)| point.iter().any(|(pk, pv)| pk == k && pv == v))
}

/// A configuration point plus how to run one replication of it.
struct Job<'a> {
    point: Point,
    replication: u64,
    seed: u64,
    run: &'a (dyn Fn(u64) -> Outcome + Sync),
}

/// Runs every job in parallel and returns rows in job order, so the
/// report does not depend on scheduling.
fn execute(cfg: &Config, jobs: Vec<Job<'_>>) -> Result<Vec<RunRow>> {
    let hash = cfg.hash();
    jobs.into_par_iter()
        .map(|j| {
            let (metrics, extra) = (j.run)(j.seed)?;
            Ok(RunRow { point: j.point, replication: j.replication, config_hash: hash.clone(), metrics, extra })
        })
        .collect()
}

type Outcome = Result<(RunMetrics, Extras)>;
type RunFn<'a> = Box<dyn Fn(u64) -> Outcome + Sync + 'a>;

/// Expands `points` into `cfg.replications` jobs each. Replication `i` uses
/// the same seed at every point.
fn replicate<'a>(cfg: &Config, points: &'a [(Point, RunFn<'a>)]) -> Vec<Job<'a>> {
    let mut jobs = Vec::new();
    for (point, run) in points {
        for i in 0..cfg.replications {
            jobs.push(Job {
                point: point.clone(),
                replication: i,
                seed: replication_seed(cfg.seed, i),
                run: run.as_ref(),
            });
        }
    }
    jobs
}

fn fmt_f(x: f64) -> String {
    x.to_string()
}

/// Runs `kind` under `cfg`.
pub fn scenario(kind: ScenarioKind, cfg: &Config) -> Result<ScenarioReport> {
    scenario_with_table(kind, cfg, None)
}

/// As [`scenario`], reusing `table` as the A-L-MAC f-table instead of
/// loading or building one.
pub fn scenario_with_table(kind: ScenarioKind, cfg: &Config, table: Option<Arc<FTable>>) -> Result<ScenarioReport> {
    let table = match (cfg.adaptation, table) {
        (AdaptationKind::Almac, Some(t)) => Some(t),
        (AdaptationKind::Almac, None) => Some(Arc::new(cfg.load_ftable()?)),
        _ => None,
    };
    let runs = match kind {
        ScenarioKind::ConvergeSweep => converge_sweep(cfg)?,
        ScenarioKind::ThroughputVsN => load_sweep(cfg, table.as_ref(), false)?,
        ScenarioKind::DelayVsN => {
            if !matches!(cfg.traffic, TrafficModel::Poisson { .. }) {
                return Err(ScenarioError::Incompatible("delay-vs-n needs traffic = poisson".into()));
            }
            load_sweep(cfg, table.as_ref(), true)?
        }
        ScenarioKind::ErrorRobustness => error_robustness(cfg, table.as_ref())?,
        ScenarioKind::NewEntrants => new_entrants(cfg)?,
        ScenarioKind::Coexist => coexist(cfg)?,
    };
    Ok(ScenarioReport { name: kind.name().to_string(), seed: cfg.seed, runs })
}

fn stations_list(cfg: &Config) -> Vec<usize> {
    if cfg.stations_list.is_empty() {
        vec![cfg.stations]
    } else {
        cfg.stations_list.clone()
    }
}

fn build(cfg: &Config, protocol: ProtocolKind, stations: usize, seed: u64, table: Option<&Arc<FTable>>) -> SimConfig {
    let sim = cfg.sim_config(protocol, stations, seed);
    match table {
        Some(t) => Config::with_ftable(sim, t),
        None => sim,
    }
}

fn require_scheduled(kind: ScenarioKind, protocols: &[ProtocolKind]) -> Result<()> {
    if protocols.contains(&ProtocolKind::Dcf) {
        return Err(ScenarioError::Incompatible(format!("{kind} needs schedule-based protocols, not dcf")));
    }
    Ok(())
}

/// Convergence over a learning-parameter grid: `beta_grid` for L-MAC,
/// `gamma_grid` for L-ZC, or the configured parameters for other protocols.
fn converge_sweep(cfg: &Config) -> Result<Vec<RunRow>> {
    let kind = ScenarioKind::ConvergeSweep;
    require_scheduled(kind, &cfg.protocols)?;
    if cfg.adaptation != AdaptationKind::Fixed {
        return Err(ScenarioError::Incompatible("converge-sweep needs adaptation = fixed".into()));
    }
    if !cfg.gamma_grid.is_empty() && !cfg.protocols.contains(&ProtocolKind::Lzc) {
        return Err(ScenarioError::Incompatible("a gamma sweep needs protocol lzc".into()));
    }
    if !cfg.beta_grid.is_empty() && !cfg.protocols.contains(&ProtocolKind::Lmac) {
        return Err(ScenarioError::Incompatible("a beta sweep needs protocol lmac".into()));
    }
    let single = cfg.protocols.len() == 1;
    let mut points: Vec<(Point, RunFn<'_>)> = Vec::new();
    for &protocol in &cfg.protocols {
        for n in stations_list(cfg) {
            let grid: Vec<(f64, f64)> = match protocol {
                ProtocolKind::Lmac if !cfg.beta_grid.is_empty() => {
                    cfg.beta_grid.iter().map(|&b| (b, f64::NAN)).collect()
                }
                ProtocolKind::Lmac if single => DEFAULT_BETAS.iter().map(|&b| (b, f64::NAN)).collect(),
                ProtocolKind::Lzc if !cfg.gamma_grid.is_empty() => {
                    cfg.gamma_grid.iter().map(|&g| (f64::NAN, g)).collect()
                }
                ProtocolKind::Lzc if single => DEFAULT_GAMMAS.iter().map(|&g| (f64::NAN, g)).collect(),
                _ => vec![(f64::NAN, f64::NAN)],
            };
            for (beta, gamma) in grid {
                let mut params = cfg.params;
                if !beta.is_nan() {
                    params.beta = beta;
                }
                if !gamma.is_nan() {
                    params.gamma = lmac_core::Gamma::Fixed(gamma);
                }
                let slots = cfg.slots;
                let theory = if protocol == ProtocolKind::Lzc && n <= slots && n <= MAX_STATIONS {
                    let g = params.gamma.resolve(slots, n);
                    Some(build_chain::<f64>(slots, n, g).and_then(|c| mean_collision_schedules(&c))?)
                } else {
                    None
                };
                let point = vec![
                    ("protocol", protocol.name().to_string()),
                    ("N", n.to_string()),
                    ("beta", fmt_f(params.beta)),
                    ("gamma", params.gamma.resolve(slots, n).to_string()),
                ];
                let cap = cfg.cap_schedules;
                let run: RunFn<'_> = Box::new(move |seed| {
                    let sim = SimConfig {
                        params,
                        horizon: Horizon::Slots(cap * slots as u64),
                        ..build(cfg, protocol, n, seed, None)
                    };
                    let mut engine = Simulator::new(sim.clone())?;
                    let mut rec = RunRecorder::for_config(&sim);
                    let converged = engine.run_until(sim.horizon, &mut rec, |_, r| r.converged().is_some())?;
                    let metrics = RunMetrics::from_recorder(&rec, &engine)?;
                    Ok((metrics, vec![("converged", Some(f64::from(u8::from(converged)))), ("kappa_theory", theory)]))
                });
                points.push((point, run));
            }
        }
    }
    execute(cfg, replicate(cfg, &points))
}

/// Default learning-strength grid for L-MAC sweeps.
pub const DEFAULT_BETAS: [f64; 9] = [0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.98, 0.99];
/// Default stay-probability grid for L-ZC sweeps.
pub const DEFAULT_GAMMAS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// One long run: totals, post-convergence throughput and the model value
/// where the model applies.
fn long_run(cfg: &Config, sim: SimConfig) -> Outcome {
    let mut engine = Simulator::new(sim.clone())?;
    let mut rec = RunRecorder::for_config(&sim);
    engine.run_for(sim.horizon, &mut rec)?;
    let metrics = RunMetrics::from_recorder(&rec, &engine)?;
    let post = match rec.after_convergence() {
        Some(t) if t.slots() > 0 => Some(t.throughput(&sim.phy)?.normalised),
        _ => None,
    };
    let fixed = cfg.adaptation == AdaptationKind::Fixed;
    let model = (fixed && sim.groups.iter().all(|g| g.protocol.is_scheduled()) && sim.joins.is_empty())
        .then(|| throughput_model::<f64>(engine.station_count(), sim.slots, &cfg.model_phy()))
        .transpose()?;
    let delivered: u64 = engine.stations().iter().map(|s| s.delivered).sum();
    let dropped: u64 = engine.stations().iter().map(|s| s.dropped).sum();
    let loss = (delivered + dropped > 0).then(|| dropped as f64 / (delivered + dropped) as f64);
    Ok((metrics, vec![("thr_post_convergence", post), ("thr_model", model), ("drop_rate", loss)]))
}

/// Throughput (and delay under Poisson traffic) against the number of
/// stations, for each configured protocol.
fn load_sweep(cfg: &Config, table: Option<&Arc<FTable>>, delay: bool) -> Result<Vec<RunRow>> {
    let mut points: Vec<(Point, RunFn<'_>)> = Vec::new();
    for &protocol in &cfg.protocols {
        for n in stations_list(cfg) {
            let mut point = vec![("protocol", protocol.name().to_string()), ("N", n.to_string())];
            if delay {
                if let TrafficModel::Poisson { rate, .. } = cfg.traffic {
                    point.push(("arrival_rate", fmt_f(rate)));
                }
            }
            let table = table.cloned();
            let run: RunFn<'_> = Box::new(move |seed| long_run(cfg, build(cfg, protocol, n, seed, table.as_ref())));
            points.push((point, run));
        }
    }
    execute(cfg, replicate(cfg, &points))
}

/// Throughput against the frame-error rate.
fn error_robustness(cfg: &Config, table: Option<&Arc<FTable>>) -> Result<Vec<RunRow>> {
    let rates = if cfg.error_rates.is_empty() { vec![0.0, 0.01, 0.1] } else { cfg.error_rates.clone() };
    let mut points: Vec<(Point, RunFn<'_>)> = Vec::new();
    for &protocol in &cfg.protocols {
        for &rate in &rates {
            let point = vec![("protocol", protocol.name().to_string()), ("err_rate", fmt_f(rate))];
            let table = table.cloned();
            let n = cfg.stations;
            let run: RunFn<'_> = Box::new(move |seed| {
                let sim = SimConfig { error_rate: rate, ..build(cfg, protocol, n, seed, table.as_ref()) };
                long_run(cfg, sim)
            });
            points.push((point, run));
        }
    }
    execute(cfg, replicate(cfg, &points))
}

/// Lets `stations` stations converge, then switches on `added` more at
/// once and times the first collision-free window of the whole network.
fn new_entrants(cfg: &Config) -> Result<Vec<RunRow>> {
    let kind = ScenarioKind::NewEntrants;
    require_scheduled(kind, &cfg.protocols)?;
    if cfg.adaptation != AdaptationKind::Fixed {
        return Err(ScenarioError::Incompatible("new-entrants needs adaptation = fixed".into()));
    }
    let added: Vec<usize> = if cfg.join_list.is_empty() { vec![cfg.join_count] } else { cfg.join_list.clone() };
    if added.contains(&0) {
        return Err(ScenarioError::Incompatible("new-entrants needs join_count or join_list of at least 1".into()));
    }
    let mut points: Vec<(Point, RunFn<'_>)> = Vec::new();
    for &protocol in &cfg.protocols {
        for &k in &added {
            let point = vec![
                ("protocol", protocol.name().to_string()),
                ("N", cfg.stations.to_string()),
                ("added", k.to_string()),
            ];
            let run: RunFn<'_> = Box::new(move |seed| {
                let (m, extra) = reconverge(cfg, protocol, cfg.stations, k, seed)?;
                Ok((m, extra))
            });
            points.push((point, run));
        }
    }
    execute(cfg, replicate(cfg, &points))
}

/// One new-entrants replication; see [`new_entrants`].
pub fn reconverge(cfg: &Config, protocol: ProtocolKind, stations: usize, added: usize, seed: u64) -> Outcome {
    let slots = cfg.slots;
    let cap = Horizon::Slots(cfg.cap_schedules * slots as u64);
    let mut sim = SimConfig { horizon: cap, ..build(cfg, protocol, stations, seed, None) };
    sim.joins.clear();
    let mut engine = Simulator::new(sim.clone())?;
    let mut rec = RunRecorder::for_config(&sim);
    let first = engine.run_until(cap, &mut rec, |_, r| r.converged().is_some())?;
    let mut extra = vec![("initial_conv_seconds", rec.converged().map(|c| c.seconds()))];
    if !first {
        extra.extend([("reconv_seconds", None), ("reconv_schedules", None)]);
        return Ok((RunMetrics::from_recorder(&rec, &engine)?, extra));
    }
    let join_slot = engine.slot_index();
    let join_us = engine.clock_us();
    engine.add_stations(StationGroup { protocol, count: added })?;
    let mut det = SlidingConvergence::new(engine.station_count(), slots, join_slot);
    let limit = Horizon::Slots(join_slot + cfg.cap_schedules * slots as u64);
    engine.run_until(limit, &mut (&mut rec, &mut det), |_, (_, d)| d.result().is_some())?;
    let found = det.result();
    extra.push(("reconv_seconds", found.map(|c| (c.start_us - join_us) * 1e-6)));
    extra.push(("reconv_schedules", found.map(|c| c.schedules as f64)));
    Ok((RunMetrics::from_recorder(&rec, &engine)?, extra))
}

/// `K` DCF stations sharing the channel with `K` stations of each other
/// protocol, plus the all-DCF network of the same size as a baseline.
fn coexist(cfg: &Config) -> Result<Vec<RunRow>> {
    if cfg.adaptation == AdaptationKind::Almac {
        return Err(ScenarioError::Incompatible("coexist supports fixed, ap or alzc adaptation".into()));
    }
    let ks = if cfg.dcf_list.is_empty() { vec![cfg.dcf_stations.max(1)] } else { cfg.dcf_list.clone() };
    if ks.contains(&0) {
        return Err(ScenarioError::Incompatible("coexist needs at least one DCF station".into()));
    }
    let mut others: Vec<ProtocolKind> = cfg.protocols.iter().copied().filter(|p| p.is_scheduled()).collect();
    others.insert(0, ProtocolKind::Dcf);
    let mut points: Vec<(Point, RunFn<'_>)> = Vec::new();
    for &protocol in &others {
        for &k in &ks {
            let point = vec![("protocol", protocol.name().to_string()), ("K", k.to_string())];
            let run: RunFn<'_> = Box::new(move |seed| {
                let mut sim = build(cfg, protocol, k, seed, None);
                sim.joins.clear();
                sim.groups =
                    vec![StationGroup { protocol, count: k }, StationGroup { protocol: ProtocolKind::Dcf, count: k }];
                let mut engine = Simulator::new(sim.clone())?;
                let mut rec = RunRecorder::for_config(&sim);
                engine.run_for(sim.horizon, &mut rec)?;
                let metrics = RunMetrics::from_recorder(&rec, &engine)?;
                let elapsed = rec.total.elapsed_us;
                let infos = engine.stations();
                // The second group is always DCF, including in the baseline.
                let dcf: u64 = infos[k..].iter().map(|s| s.delivered).sum();
                let other: u64 = infos[..k].iter().map(|s| s.delivered).sum();
                let share = |p: u64| (elapsed > 0.0).then(|| p as f64 * sim.phy.payload_time() / elapsed);
                Ok((metrics, vec![("thr_dcf_norm", share(dcf)), ("thr_other_norm", share(other))]))
            });
            points.push((point, run));
        }
    }
    execute(cfg, replicate(cfg, &points))
}
