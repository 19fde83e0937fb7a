//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment. Every key has a documented
//! default (see [`KEYS`]), unknown keys are rejected, and list values are
//! comma separated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use lmac_core::adapt::{f_table_build, FTable, MAX_DOUBLINGS};
use lmac_core::traffic::{TrafficModel, QUEUE_CAPACITY};
use lmac_core::{
    Adaptation, Gamma, Horizon, Join, JoinTime, Phy, ProtocolKind, ProtocolParams, SimConfig, StationGroup,
};
use sha2::{Digest, Sha256};

pub struct KeySpec {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { name, default, help }
}

/// Every recognised key with its default.
pub const KEYS: &[KeySpec] = &[
    key("protocol", "lmac", "dcf, lbeb, zc, lzc or lmac"),
    key("protocols", "", "protocols compared by a scenario; empty means `protocol` alone"),
    key("stations", "16", "number of stations N"),
    key("stations_list", "", "N values for the *-vs-n scenarios"),
    key("slots", "16", "schedule length C, or base length B under adaptation"),
    key("beta", "0.95", "L-MAC learning strength, in (0,1)"),
    key("gamma", "auto", "L-ZC stay probability in (0,1), or auto = 1/(C-N+2)"),
    key("adaptation", "fixed", "fixed, ap (access point announces C), alzc or almac"),
    key("ftable", "", "CSV f-table for almac; built on demand when empty"),
    key("probe_every", "10", "almac checkpoints between halving probes"),
    key("traffic", "saturated", "saturated or poisson"),
    key("arrival_rate", "62.5", "Poisson arrivals per station, packets per second"),
    key("queue_capacity", "50", "buffer size for Poisson traffic"),
    key("error_rate", "0", "probability that a lone transmission is corrupted"),
    key("error_rates", "", "error rates for the error-robustness scenario"),
    key("payload_bytes", "1000", "payload carried by simulated frames"),
    key("model_payload_bytes", "1020", "payload assumed by the analytical throughput model"),
    key("data_rate_mbps", "11", "PHY data rate"),
    key("basic_rate_mbps", "11", "PHY basic rate used for the ACK"),
    key("sigma_us", "20", "idle slot length"),
    key("sifs_us", "10", "SIFS"),
    key("difs_us", "50", "DIFS"),
    key("horizon_seconds", "10", "simulated time per run"),
    key("horizon_slots", "", "run length in MAC slots; replaces horizon_seconds"),
    key("cap_schedules", "1000000", "schedules before a convergence run is declared stuck"),
    key("replications", "10", "runs per configuration point"),
    key("seed", "1", "base seed; run i uses a seed derived from (seed, i)"),
    key("join_count", "0", "stations switched on during the run (sim) or added (new-entrants)"),
    key("join_at_seconds", "", "when the joiners of `sim` switch on"),
    key("join_list", "", "numbers of stations added in the new-entrants scenario"),
    key("dcf_stations", "0", "extra DCF stations sharing the channel"),
    key("dcf_list", "", "K values for the coexist scenario"),
    key("beta_grid", "", "beta values for converge-sweep"),
    key("gamma_grid", "", "gamma values for converge-sweep"),
    key("ftable_lens", "", "schedule lengths tabulated by `ftable`; empty means B, 2B, 4B, 8B"),
    key("ftable_replications", "1000", "Monte Carlo runs per f-table entry"),
    key("ftable_confidence", "0.95", "convergence probability defining f(C)"),
    key("markov_slots", "8,12,16", "C values for `markov`"),
    key("markov_stations", "2,4,8,12,14,16", "N values for `markov` (pairs with N > C are skipped)"),
    key("markov_gammas", "0.1,0.5,0.9", "gamma values for `markov`"),
    key("rate_high", "200", "upper end of the achievable-rate search, packets per second"),
    key("rate_tolerance", "1", "resolution of the achievable-rate search, packets per second"),
];

/// One problem with one key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub key: String,
    pub value: String,
    pub constraint: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        write!(f, "`{}` = `{}`: {}", self.key, self.value, self.constraint)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration:\n{}", render(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ConfigError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            ConfigError::Invalid(d) => d,
            ConfigError::Io { .. } => &[],
        }
    }

    fn one(key: &str, value: impl ToString, constraint: impl ToString) -> Self {
        ConfigError::Invalid(vec![Diagnostic {
            line: None,
            key: key.to_string(),
            value: value.to_string(),
            constraint: constraint.to_string(),
        }])
    }
}

fn render(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdaptationKind {
    Fixed,
    AccessPoint,
    Alzc,
    Almac,
}

impl FromStr for AdaptationKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "ap" => Ok(Self::AccessPoint),
            "alzc" => Ok(Self::Alzc),
            "almac" => Ok(Self::Almac),
            _ => Err(()),
        }
    }
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct Config {
    pub protocol: ProtocolKind,
    pub protocols: Vec<ProtocolKind>,
    pub stations: usize,
    pub stations_list: Vec<usize>,
    pub slots: usize,
    pub params: ProtocolParams,
    pub adaptation: AdaptationKind,
    pub ftable: Option<PathBuf>,
    pub probe_every: usize,
    pub traffic: TrafficModel,
    pub error_rate: f64,
    pub error_rates: Vec<f64>,
    pub phy: Phy,
    pub model_payload_bytes: u64,
    pub horizon: Horizon,
    pub cap_schedules: u64,
    pub replications: u64,
    pub seed: u64,
    pub join_count: usize,
    pub join_at_seconds: Option<f64>,
    pub join_list: Vec<usize>,
    pub dcf_stations: usize,
    pub dcf_list: Vec<usize>,
    pub beta_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub ftable_lens: Vec<usize>,
    pub ftable_replications: usize,
    pub ftable_confidence: f64,
    pub markov_slots: Vec<usize>,
    pub markov_stations: Vec<usize>,
    pub markov_gammas: Vec<f64>,
    pub rate_high: f64,
    pub rate_tolerance: f64,
    given: BTreeMap<&'static str, String>,
    effective: BTreeMap<&'static str, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self::parse("").expect("defaults are valid")
    }
}

/// Collects diagnostics while reading typed values.
struct Reader<'a> {
    values: BTreeMap<&'static str, (Option<usize>, String)>,
    diags: &'a mut Vec<Diagnostic>,
}

impl Reader<'_> {
    fn raw(&self, key: &'static str) -> (Option<usize>, &str) {
        let (line, v) = &self.values[key];
        (*line, v.as_str())
    }

    fn fail(&mut self, key: &'static str, constraint: impl ToString) {
        let (line, value) = self.raw(key);
        let d = Diagnostic { line, key: key.into(), value: value.into(), constraint: constraint.to_string() };
        self.diags.push(d);
    }

    fn parse<T: FromStr>(&mut self, key: &'static str, what: &str) -> Option<T> {
        match self.raw(key).1.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.fail(key, format!("expected {what}"));
                None
            }
        }
    }

    fn optional<T: FromStr>(&mut self, key: &'static str, what: &str) -> Option<Option<T>> {
        if self.raw(key).1.is_empty() {
            Some(None)
        } else {
            self.parse(key, what).map(Some)
        }
    }

    fn list<T: FromStr>(&mut self, key: &'static str, what: &str) -> Vec<T> {
        let raw = self.raw(key).1.to_string();
        let mut out = Vec::new();
        for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse() {
                Ok(v) => out.push(v),
                Err(_) => {
                    self.fail(key, format!("expected a comma-separated list of {what}"));
                    return Vec::new();
                }
            }
        }
        out
    }

    fn positive(&mut self, key: &'static str) -> Option<f64> {
        let v = self.parse::<f64>(key, "a number");
        self.check(key, v, |x| x > 0.0 && x.is_finite(), "must be positive")
    }

    fn non_negative(&mut self, key: &'static str) -> Option<f64> {
        let v = self.parse::<f64>(key, "a number");
        self.check(key, v, |x| x >= 0.0 && x.is_finite(), "must be finite and non-negative")
    }

    fn check<T: Copy>(
        &mut self,
        key: &'static str,
        value: Option<T>,
        ok: impl Fn(T) -> bool,
        constraint: &str,
    ) -> Option<T> {
        match value {
            Some(v) if !ok(v) => {
                self.fail(key, constraint);
                None
            }
            other => other,
        }
    }
}

fn open_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

fn closed_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with(text, &[])
    }

    /// Parses `text`, then applies `overrides` as if they were extra lines.
    pub fn parse_with(text: &str, overrides: &[(&str, String)]) -> Result<Self, ConfigError> {
        let mut diags = Vec::new();
        let mut given: BTreeMap<&'static str, (Option<usize>, String)> = BTreeMap::new();
        let lookup = |k: &str| KEYS.iter().find(|s| s.name == k).map(|s| s.name);
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                diags.push(Diagnostic {
                    line: Some(n + 1),
                    key: line.into(),
                    value: String::new(),
                    constraint: "expected `key = value`".into(),
                });
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            match lookup(k) {
                Some(name) => {
                    given.insert(name, (Some(n + 1), v.to_string()));
                }
                None => diags.push(Diagnostic {
                    line: Some(n + 1),
                    key: k.into(),
                    value: v.into(),
                    constraint: "unknown key".into(),
                }),
            }
        }
        for (k, v) in overrides {
            match lookup(k) {
                Some(name) => {
                    given.insert(name, (None, v.clone()));
                }
                None => diags.push(Diagnostic {
                    line: None,
                    key: k.to_string(),
                    value: v.clone(),
                    constraint: "unknown key".into(),
                }),
            }
        }
        let explicit: BTreeMap<&'static str, String> = given.iter().map(|(k, (_, v))| (*k, v.clone())).collect();
        let mut values = BTreeMap::new();
        for spec in KEYS {
            let v = given.remove(spec.name).unwrap_or((None, spec.default.to_string()));
            values.insert(spec.name, v);
        }
        let effective = values.iter().map(|(k, (_, v))| (*k, v.clone())).collect();
        let mut r = Reader { values, diags: &mut diags };

        let protocol = r.parse::<ProtocolKind>("protocol", "a protocol name");
        let protocols = r.list::<ProtocolKind>("protocols", "protocol names");
        let stations = r.parse::<usize>("stations", "an integer");
        let stations = r.check("stations", stations, |n| n >= 1, "must be at least 1");
        let stations_list = r.list::<usize>("stations_list", "integers");
        if stations_list.contains(&0) {
            r.fail("stations_list", "every entry must be at least 1");
        }
        let slots = r.parse::<usize>("slots", "an integer");
        let slots = r.check("slots", slots, |c| c >= 1, "must be at least 1");
        let beta = r.parse::<f64>("beta", "a number");
        let beta = r.check("beta", beta, open_unit, "must lie in (0,1)");
        let gamma = match r.raw("gamma").1 {
            "auto" => Some(Gamma::Auto),
            _ => {
                let g = r.parse::<f64>("gamma", "a number or `auto`");
                r.check("gamma", g, open_unit, "must lie in (0,1)").map(Gamma::Fixed)
            }
        };
        let adaptation = match r.raw("adaptation").1.parse::<AdaptationKind>() {
            Ok(a) => Some(a),
            Err(()) => {
                r.fail("adaptation", "expected one of fixed, ap, alzc, almac");
                None
            }
        };
        let ftable = Some(r.raw("ftable").1).filter(|s| !s.is_empty()).map(PathBuf::from);
        let probe_every = r.parse::<usize>("probe_every", "an integer");
        let probe_every = r.check("probe_every", probe_every, |p| p >= 1, "must be at least 1");
        let arrival_rate = r.parse::<f64>("arrival_rate", "a number");
        let arrival_rate =
            r.check("arrival_rate", arrival_rate, |x| x >= 0.0 && x.is_finite(), "must be finite and non-negative");
        let capacity = r.parse::<usize>("queue_capacity", "an integer");
        let capacity = r.check("queue_capacity", capacity, |c| c >= 1, "must be at least 1");
        let traffic = match r.raw("traffic").1 {
            "saturated" => Some(TrafficModel::Saturated),
            "poisson" => Some(TrafficModel::Poisson {
                rate: arrival_rate.unwrap_or(0.0),
                capacity: capacity.unwrap_or(QUEUE_CAPACITY),
            }),
            _ => {
                r.fail("traffic", "expected saturated or poisson");
                None
            }
        };
        let error_rate = r.parse::<f64>("error_rate", "a number");
        let error_rate = r.check("error_rate", error_rate, closed_unit, "must lie in [0,1]");
        let error_rates = r.list::<f64>("error_rates", "numbers");
        if !error_rates.iter().all(|&e| closed_unit(e)) {
            r.fail("error_rates", "every entry must lie in [0,1]");
        }
        let payload = r.parse::<u64>("payload_bytes", "an integer");
        let payload = r.check("payload_bytes", payload, |p| p >= 1, "must be at least 1");
        let model_payload = r.parse::<u64>("model_payload_bytes", "an integer");
        let model_payload = r.check("model_payload_bytes", model_payload, |p| p >= 1, "must be at least 1");
        let data_rate = r.positive("data_rate_mbps");
        let basic_rate = r.positive("basic_rate_mbps");
        let sigma = r.positive("sigma_us");
        let sifs = r.non_negative("sifs_us");
        let difs = r.non_negative("difs_us");
        let seconds = r.non_negative("horizon_seconds");
        let horizon_slots = r.optional::<u64>("horizon_slots", "an integer").flatten();
        if horizon_slots.is_some() && explicit.contains_key("horizon_seconds") {
            r.fail("horizon_slots", "set either horizon_slots or horizon_seconds, not both");
        }
        let cap = r.parse::<u64>("cap_schedules", "an integer");
        let cap = r.check("cap_schedules", cap, |c| c >= 1, "must be at least 1");
        let replications = r.parse::<u64>("replications", "an integer");
        let replications = r.check("replications", replications, |n| n >= 1, "must be at least 1");
        let seed = r.parse::<u64>("seed", "an unsigned integer");
        let join_count = r.parse::<usize>("join_count", "an integer");
        let join_at = r.optional::<f64>("join_at_seconds", "a number").flatten();
        let join_at =
            r.check("join_at_seconds", join_at, |t| t >= 0.0 && t.is_finite(), "must be finite and non-negative");
        let join_list = r.list::<usize>("join_list", "integers");
        if join_list.contains(&0) {
            r.fail("join_list", "every entry must be at least 1");
        }
        let dcf_stations = r.parse::<usize>("dcf_stations", "an integer");
        let dcf_list = r.list::<usize>("dcf_list", "integers");
        let beta_grid = r.list::<f64>("beta_grid", "numbers");
        if !beta_grid.iter().all(|&b| open_unit(b)) {
            r.fail("beta_grid", "every entry must lie in (0,1)");
        }
        let gamma_grid = r.list::<f64>("gamma_grid", "numbers");
        if !gamma_grid.iter().all(|&g| open_unit(g)) {
            r.fail("gamma_grid", "every entry must lie in (0,1)");
        }
        let ftable_lens = r.list::<usize>("ftable_lens", "integers");
        if ftable_lens.iter().any(|&c| c < 2) {
            r.fail("ftable_lens", "every entry must be at least 2");
        }
        let ftable_replications = r.parse::<usize>("ftable_replications", "an integer");
        let ftable_replications =
            r.check("ftable_replications", ftable_replications, |n| n >= 1000, "must be at least 1000");
        let ftable_confidence = r.parse::<f64>("ftable_confidence", "a number");
        let ftable_confidence = r.check("ftable_confidence", ftable_confidence, open_unit, "must lie in (0,1)");
        let markov_slots = r.list::<usize>("markov_slots", "integers");
        let markov_stations = r.list::<usize>("markov_stations", "integers");
        if markov_stations.iter().any(|&n| n == 0 || n > lmac_core::markov::MAX_STATIONS) {
            r.fail("markov_stations", format!("entries must lie in 1..={}", lmac_core::markov::MAX_STATIONS));
        }
        let markov_gammas = r.list::<f64>("markov_gammas", "numbers");
        if !markov_gammas.iter().all(|&g| open_unit(g)) {
            r.fail("markov_gammas", "every entry must lie in (0,1)");
        }
        let rate_high = r.positive("rate_high");
        let rate_tolerance = r.positive("rate_tolerance");

        if let (Some(kind), Some(c)) = (protocol, slots) {
            if kind == ProtocolKind::Lmac && c < 2 {
                r.fail("slots", "L-MAC needs at least two slots");
            }
        }
        if adaptation == Some(AdaptationKind::Almac) && protocol.is_some_and(|p| p != ProtocolKind::Lmac) {
            r.fail("adaptation", "almac adapts L-MAC stations only");
        }
        if adaptation == Some(AdaptationKind::Alzc)
            && protocol.is_some_and(|p| !matches!(p, ProtocolKind::Zc | ProtocolKind::Lzc))
        {
            r.fail("adaptation", "alzc adapts ZC or L-ZC stations only");
        }

        if !diags.is_empty() {
            diags.sort_by_key(|d| d.line.unwrap_or(usize::MAX));
            return Err(ConfigError::Invalid(diags));
        }
        let protocol = protocol.expect("checked");
        let phy = Phy {
            data_rate: data_rate.expect("checked"),
            basic_rate: basic_rate.expect("checked"),
            payload_bytes: payload.expect("checked"),
            sifs: sifs.expect("checked"),
            difs: difs.expect("checked"),
            sigma: sigma.expect("checked"),
            ..Phy::table()
        };
        let mut cfg = Config {
            protocol,
            protocols: if protocols.is_empty() { vec![protocol] } else { protocols },
            stations: stations.expect("checked"),
            stations_list,
            slots: slots.expect("checked"),
            params: ProtocolParams { beta: beta.expect("checked"), gamma: gamma.expect("checked") },
            adaptation: adaptation.expect("checked"),
            ftable,
            probe_every: probe_every.expect("checked"),
            traffic: traffic.expect("checked"),
            error_rate: error_rate.expect("checked"),
            error_rates,
            phy,
            model_payload_bytes: model_payload.expect("checked"),
            horizon: match horizon_slots {
                Some(n) => Horizon::Slots(n),
                None => Horizon::Seconds(seconds.expect("checked")),
            },
            cap_schedules: cap.expect("checked"),
            replications: replications.expect("checked"),
            seed: seed.expect("checked"),
            join_count: join_count.expect("checked"),
            join_at_seconds: join_at,
            join_list,
            dcf_stations: dcf_stations.expect("checked"),
            dcf_list,
            beta_grid,
            gamma_grid,
            ftable_lens,
            ftable_replications: ftable_replications.expect("checked"),
            ftable_confidence: ftable_confidence.expect("checked"),
            markov_slots,
            markov_stations,
            markov_gammas,
            rate_high: rate_high.expect("checked"),
            rate_tolerance: rate_tolerance.expect("checked"),
            given: explicit,
            effective,
        };
        // Surface engine-level problems (e.g. auto gamma with N > C) now.
        cfg.sim_config(cfg.protocol, cfg.stations, 0).validate().map_err(core_error)?;
        cfg.effective.insert("gamma", cfg.gamma_label());
        // Echo only the horizon in force so the echo parses back.
        if matches!(cfg.horizon, Horizon::Slots(_)) {
            cfg.effective.remove("horizon_seconds");
        }
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(&str, String)]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse_with(&text, overrides)
    }

    /// True if `key` was given in the file or as an override.
    pub fn is_set(&self, key: &str) -> bool {
        self.given.contains_key(key)
    }

    /// This configuration with some keys replaced, validated afresh.
    pub fn derive(&self, overrides: &[(&str, String)]) -> Result<Self, ConfigError> {
        let replaced = |k: &str| {
            overrides.iter().any(|(o, _)| {
                *o == k
                    || matches!((*o, k), ("horizon_slots", "horizon_seconds") | ("horizon_seconds", "horizon_slots"))
            })
        };
        let text: String =
            self.given.iter().filter(|(k, _)| !replaced(k)).map(|(k, v)| format!("{k} = {v}\n")).collect();
        Self::parse_with(&text, overrides)
    }

    fn gamma_label(&self) -> String {
        match self.params.gamma {
            Gamma::Auto => "auto".into(),
            Gamma::Fixed(g) => g.to_string(),
        }
    }

    /// The effective configuration, every key with its value, sorted.
    pub fn echo(&self) -> String {
        self.effective.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Short SHA-256 digest of [`Config::echo`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.echo().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// The schedule lengths an f-table must cover for this configuration.
    pub fn ftable_lengths(&self) -> Vec<usize> {
        if self.ftable_lens.is_empty() {
            (0..4).map(|k| (self.slots << k).max(2)).collect()
        } else {
            self.ftable_lens.clone()
        }
    }

    /// Loads the configured f-table, or builds one when none is given.
    pub fn load_ftable(&self) -> Result<FTable, ConfigError> {
        match &self.ftable {
            Some(path) => {
                let file =
                    std::fs::File::open(path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                let table = FTable::read_csv(file).map_err(|e| ConfigError::one("ftable", path.display(), e))?;
                for k in 0..=MAX_DOUBLINGS {
                    table.lookup(self.slots << k).map_err(|e| ConfigError::one("ftable", path.display(), e))?;
                }
                Ok(table)
            }
            None => self.build_ftable(),
        }
    }

    pub fn build_ftable(&self) -> Result<FTable, ConfigError> {
        f_table_build(
            &self.ftable_lengths(),
            self.ftable_confidence,
            self.ftable_replications,
            self.params.beta,
            self.cap_schedules,
            self.seed,
        )
        .map_err(core_error)
    }

    /// Engine configuration for `stations` stations of `protocol` plus the
    /// configured DCF population and joiners. The A-L-MAC f-table is left
    /// empty; see [`Config::with_ftable`].
    pub fn sim_config(&self, protocol: ProtocolKind, stations: usize, seed: u64) -> SimConfig {
        let mut groups = vec![StationGroup { protocol, count: stations }];
        if self.dcf_stations > 0 {
            groups.push(StationGroup { protocol: ProtocolKind::Dcf, count: self.dcf_stations });
        }
        let joins = match (self.join_count, self.join_at_seconds) {
            (0, _) => Vec::new(),
            (count, at) => {
                vec![Join { at: JoinTime::Seconds(at.unwrap_or(0.0)), group: StationGroup { protocol, count } }]
            }
        };
        let adaptation = match self.adaptation {
            AdaptationKind::Fixed => Adaptation::Fixed,
            AdaptationKind::AccessPoint => Adaptation::AccessPoint,
            AdaptationKind::Alzc => Adaptation::Alzc,
            AdaptationKind::Almac => {
                Adaptation::Almac { table: Arc::new(placeholder_table(self.slots)), probe_every: self.probe_every }
            }
        };
        SimConfig {
            groups,
            slots: self.slots,
            params: self.params,
            adaptation,
            traffic: self.traffic,
            error_rate: self.error_rate,
            phy: self.phy.clone(),
            horizon: self.horizon,
            seed,
            joins,
        }
    }

    /// Swaps the real f-table into an A-L-MAC configuration.
    pub fn with_ftable(cfg: SimConfig, table: &Arc<FTable>) -> SimConfig {
        match cfg.adaptation {
            Adaptation::Almac { probe_every, .. } => {
                SimConfig { adaptation: Adaptation::Almac { table: table.clone(), probe_every }, ..cfg }
            }
            _ => cfg,
        }
    }

    /// The analytical model's channel: simulated timings, model payload.
    pub fn model_phy(&self) -> Phy {
        self.phy.clone().with_payload(self.model_payload_bytes)
    }
}

/// A table covering every reachable length so validation can run before
/// the real table exists.
fn placeholder_table(base: usize) -> FTable {
    let mut t = FTable::new();
    for k in 0..=MAX_DOUBLINGS {
        t.insert(base << k, lmac_core::adapt::FEntry { f: 1, ci_low: 1.0, ci_high: 1.0 });
    }
    t
}

/// Maps an engine validation error onto a config diagnostic.
pub fn core_error(e: lmac_core::Error) -> ConfigError {
    match e {
        lmac_core::Error::InvalidParam { name, value, constraint } => ConfigError::one(name, value, constraint),
        other => ConfigError::one("config", "", other),
    }
}
