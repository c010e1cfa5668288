//! `shockwalk`: run exact verifications, simulations and hydrodynamic
//! checks from TOML experiment files or built-in presets.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod output;
mod presets;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, Command as Kind, ExperimentConfig};
use crate::error::{CliError, Status};

/// Environment variable selecting the number of worker threads.
const WORKERS_VAR: &str = "SHOCKWALK_WORKERS";

#[derive(Parser)]
#[command(
    name = "shockwalk",
    version,
    about = "Second class particles, shock measures and their random walks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Source {
    /// Built-in experiment (see `list-presets`).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact generator identities by enumeration.
    Verify(Source),
    /// Coupled kinetic Monte Carlo.
    Simulate(Source),
    /// Fluxes, Rankine-Hugoniot and bound-state velocities.
    Hydro(Source),
    /// Attractivity and rate consistency of a model, e.g.
    /// `rates-check --model asep p=0.7 q=0.3`.
    RatesCheck {
        #[arg(long)]
        model: String,
        /// `name=value` pairs.
        params: Vec<String>,
    },
    /// Every built-in preset, one output subdirectory each.
    RunAllPresets {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only presets whose name contains this.
        #[arg(long)]
        filter: Option<String>,
        /// Skip the (slow) simulation presets.
        #[arg(long)]
        skip_simulate: bool,
    },
    /// Names of the built-in presets.
    ListPresets,
}

fn setup_workers() -> Result<(), CliError> {
    let Ok(v) = std::env::var(WORKERS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{WORKERS_VAR} must be a positive integer, got {v:?}")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("{WORKERS_VAR}: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn load(src: &Source) -> Result<(ExperimentConfig, String), CliError> {
    let text = match (&src.preset, &src.config) {
        (Some(name), _) => presets::find(name)
            .ok_or_else(|| CliError::Config(format!("unknown preset {name:?}; see `shockwalk list-presets`")))?
            .to_string(),
        (None, Some(path)) => {
            fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?
        }
        (None, None) => return Err(CliError::Config("give --preset or --config".into())),
    };
    let cfg = parse_config(&text)?;
    Ok((cfg, text))
}

/// Runs one experiment, prints its table and writes its outputs.
fn execute(cfg: &ExperimentConfig, text: &str, out: Option<&Path>) -> Status {
    let outcome = match run::run(cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{}: {e}", cfg.label());
            return e.status();
        }
    };
    print!("{}", output::render(&outcome));
    if let Some(dir) = out.map(Path::to_path_buf).or_else(|| cfg.output.dir.clone()) {
        if let Err(e) = output::write_all(&dir, cfg, text, &outcome) {
            eprintln!("{}: {e}", cfg.label());
            return e.status();
        }
    }
    if outcome.pass() {
        Status::Pass
    } else {
        Status::CheckFailed
    }
}

fn run_source(src: &Source, expect: Kind) -> Status {
    let (cfg, text) = match load(src) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{e}");
            return e.status();
        }
    };
    // presets carry their own command; files must match the subcommand
    if src.preset.is_none() && cfg.command != expect {
        eprintln!("config error: file is a {:?} experiment, not {expect:?}", cfg.command);
        return Status::Usage;
    }
    execute(&cfg, &text, src.out.as_deref())
}

fn rates_check(model: &str, params: &[String]) -> Status {
    let mut text = format!("command = \"rates-check\"\n[model]\nkind = {model:?}\n");
    for p in params {
        let Some((k, v)) = p.split_once('=') else {
            eprintln!("config error: expected name=value, got {p:?}");
            return Status::Usage;
        };
        text += &format!("{} = {}\n", k.trim(), v.trim());
    }
    match parse_config(&text) {
        Ok(cfg) => execute(&cfg, &text, None),
        Err(e) => {
            eprintln!("{e}");
            e.status()
        }
    }
}

fn run_all(out: Option<&Path>, filter: Option<&str>, skip_simulate: bool) -> Status {
    let mut worst = Status::Pass;
    let mut summary = Vec::new();
    for (name, text) in presets::PRESETS {
        if filter.is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let cfg = match parse_config(text) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{name}: {e}");
                worst = worst.max(e.status());
                continue;
            }
        };
        if skip_simulate && cfg.command == Kind::Simulate {
            continue;
        }
        let status = execute(&cfg, text, out.map(|d| d.join(name)).as_deref());
        summary.push((name, status));
        worst = worst.max(status);
    }
    println!("== summary ==");
    for (name, s) in summary {
        println!(
            "{:<40} {}",
            name,
            match s {
                Status::Pass => "PASS",
                Status::CheckFailed => "FAIL",
                Status::Usage => "CONFIG ERROR",
                Status::Resource => "RESOURCE ERROR",
            }
        );
    }
    worst
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Status::Usage.into()
            } else {
                Status::Pass.into()
            };
        }
    };
    if let Err(e) = setup_workers() {
        eprintln!("{e}");
        return e.status().into();
    }
    let status = match &cli.command {
        Cmd::Verify(s) => run_source(s, Kind::Verify),
        Cmd::Simulate(s) => run_source(s, Kind::Simulate),
        Cmd::Hydro(s) => run_source(s, Kind::Hydro),
        Cmd::RatesCheck { model, params } => rates_check(model, params),
        Cmd::RunAllPresets {
            out,
            filter,
            skip_simulate,
        } => run_all(out.as_deref(), filter.as_deref(), *skip_simulate),
        Cmd::ListPresets => {
            for (name, _) in presets::PRESETS {
                println!("{name}");
            }
            Status::Pass
        }
    };
    status.into()
}
