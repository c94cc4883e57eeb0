use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use relsec::dm::{DmChannel, DmGrid};
use relsec::experiment::{
    cmd_bounds, cmd_dm_check, cmd_subchannel_map, cmd_sweep_relay, map_csv, sweep_csv, DmSource, ExperimentConfig,
    Manifest,
};
use relsec::Error;

#[derive(Parser, Debug)]
#[command(name = "relsec", version, about = "Secrecy-rate bounds for parallel relay-eavesdropper channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; a `.manifest.json` is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// threshold | best | exhaustive | fixed:DF,NF,...
    #[arg(long)]
    mode_rule: Option<String>,
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimized lower and upper bounds as a JSON record.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Also run the grid oracle with this many points per dimension.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Ergodic bounds against relay position, as CSV.
    SweepRelay {
        #[command(flatten)]
        common: Common,
    },
    /// Per-subchannel modes, powers and rates, as CSV.
    SubchannelMap {
        #[command(flatten)]
        common: Common,
    },
    /// Property checks of the finite-alphabet evaluators.
    DmCheck {
        /// Channel fixture in the dense-table text format.
        #[arg(long, conflicts_with = "random")]
        fixture: Option<PathBuf>,
        /// Number of random binary channels.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Lattice denominator of the capacity search.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Validation(anyhow::Error),
    Check,
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Validation(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(_) => Failure::Validation(e),
            None => Failure::Other(e),
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&common.config)
        .with_context(|| format!("loading {}", common.config.display()))?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(r) = &common.mode_rule {
        cfg.mode_rule = r.clone();
    }
    if let Some(r) = common.restarts {
        cfg.optimizer.restarts = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn emit(out: Option<&Path>, data: &str, manifest: impl FnOnce(Vec<String>) -> String) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, data).with_context(|| format!("writing {}", path.display()))?;
            let m = manifest_path(path);
            let outputs = vec![path.display().to_string()];
            std::fs::write(&m, manifest(outputs)).with_context(|| format!("writing {}", m.display()))?;
        }
        None => print!("{data}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bounds { common, grid } => {
            let cfg = load(&common)?;
            let record = cmd_bounds(&cfg, grid)?;
            let json = serde_json::to_string_pretty(&record).context("serializing bounds")? + "\n";
            emit(common.out.as_deref(), &json, |o| Manifest::new("bounds", &cfg, o).to_json())?;
        }
        Command::SweepRelay { common } => {
            let cfg = load(&common)?;
            let rows = cmd_sweep_relay(&cfg)?;
            emit(common.out.as_deref(), &sweep_csv(&rows), |o| {
                Manifest::new("sweep-relay", &cfg, o).to_json()
            })?;
        }
        Command::SubchannelMap { common } => {
            let cfg = load(&common)?;
            let rows = cmd_subchannel_map(&cfg)?;
            emit(common.out.as_deref(), &map_csv(&rows), |o| {
                Manifest::new("subchannel-map", &cfg, o).to_json()
            })?;
        }
        Command::DmCheck {
            fixture,
            random,
            seed,
            grid,
            out,
        } => {
            let source = match (fixture, random) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    DmSource::Fixture(DmChannel::parse(&text)?)
                }
                (None, Some(count)) => DmSource::Random { count },
                (None, None) => {
                    return Err(Failure::Validation(anyhow::anyhow!("dm-check needs --fixture or --random")));
                }
            };
            let mut dm_grid = DmGrid::default();
            if let Some(g) = grid {
                dm_grid.lattice = g;
            }
            let report = cmd_dm_check(&source, seed, &dm_grid)?;
            let text = report.to_text();
            match &out {
                Some(path) => std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            if !report.passed() {
                return Err(Failure::Check);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Check) => {
            eprintln!("dm-check: property violations found");
            ExitCode::from(1)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
