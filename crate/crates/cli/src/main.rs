use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lmac_cli::commands::{self, create, write_markov, write_report, write_sim};
use lmac_cli::config::KEYS;
use lmac_cli::reproduce::reproduce_all;
use lmac_cli::{scenario, Config, ScenarioError, ScenarioKind};

#[derive(Parser)]
#[command(name = "lmac", version, about = "Simulate and analyse learning MAC protocols for WLANs")]
struct Cli {
    /// Flat `key = value` configuration file; see `lmac keys`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed, overriding the file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replications per point, overriding the file.
    #[arg(long, global = true)]
    reps: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicated runs of the configured network, with the trace of the first.
    Sim,
    /// One experiment family: converge-sweep, throughput-vs-n, delay-vs-n,
    /// error-robustness, new-entrants or coexist.
    Scenario { kind: String },
    /// Exact L-ZC chain results over the configured grid.
    Markov,
    /// Monte Carlo table of f(C) for A-L-MAC.
    Ftable,
    /// Every dataset, one CSV set each.
    ReproduceAll,
    /// List configuration keys and their defaults.
    Keys,
}

/// Exit status for bad input, distinct from runtime failures.
const INVALID: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Keys = cli.command {
        let mut stdout = std::io::stdout().lock();
        for k in KEYS {
            let default = if k.default.is_empty() { "-" } else { k.default };
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            if writeln!(stdout, "{:<22} {:<16} {}", k.name, default, k.help).is_err() {
                break;
            }
        }
        return ExitCode::SUCCESS;
    }
    let mut overrides = Vec::new();
    if let Some(s) = cli.seed {
        overrides.push(("seed", s.to_string()));
    }
    if let Some(r) = cli.reps {
        overrides.push(("replications", r.to_string()));
    }
    let cfg = match &cli.config {
        Some(path) => Config::load(path, &overrides),
        None => Config::parse_with("", &overrides),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(INVALID);
        }
    };
    match run(&cli, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(INVALID)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

/// Returns whether everything requested was produced.
fn run(cli: &Cli, cfg: &Config) -> Result<bool, ScenarioError> {
    let out = &cli.out;
    match &cli.command {
        Command::Sim => {
            let (report, trace) = commands::sim(cfg)?;
            write_sim(&report, &trace, cfg, out)?;
            eprintln!("wrote {} run(s) to {}", report.runs.len(), out.display());
        }
        Command::Scenario { kind } => {
            let kind: ScenarioKind = kind.parse()?;
            let report = scenario(kind, cfg)?;
            write_report(&report, &[cfg], out, kind.name())?;
            eprintln!("wrote {} run(s) to {}", report.runs.len(), out.display());
        }
        Command::Markov => {
            let rows = commands::markov(cfg)?;
            write_markov(&rows, cfg, create(out, "markov.csv")?)?;
            for r in rows.iter().filter(|r| !r.closed_form_block()) {
                eprintln!(
                    "note: C={} N={} gamma={}: largest eigenvalue from the {}-station block",
                    r.slots, r.stations, r.gamma, r.max_block
                );
            }
        }
        Command::Ftable => {
            let table = commands::ftable(cfg)?;
            table.write_csv(create(out, "ftable.csv")?)?;
        }
        Command::ReproduceAll => {
            let outcome = reproduce_all(cfg, out)?;
            for (name, e) in &outcome.failed {
                eprintln!("{name}: failed: {e}");
            }
            eprintln!("wrote {} dataset(s) to {}", outcome.written.len(), out.display());
            return Ok(outcome.failed.is_empty());
        }
        Command::Keys => unreachable!("handled before loading the config"),
    }
    Ok(true)
}
