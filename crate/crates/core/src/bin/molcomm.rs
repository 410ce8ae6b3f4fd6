use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use molcomm::experiment::{compute_experiment, parse_config, write_outputs, ExperimentKind};
use molcomm::Error;

/// Runs molecular-communication detector experiments and writes CSV results
/// plus a JSON metadata sidecar.
#[derive(Debug, Parser)]
#[command(name = "molcomm", version)]
struct Cli {
    /// One of: cir, threshold-sweep, offset-sweep, samples-sweep.
    experiment: String,

    /// Config file (flat `key = value` or JSON).
    #[arg(long)]
    config: PathBuf,

    /// RNG seed; overrides `rng_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV path; overrides `output_path` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

// sysexits-style codes, one per failure class.
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_NO_INPUT: u8 = 66;
const EXIT_CANT_CREATE: u8 = 73;
const EXIT_CONFIG: u8 = 78;

fn main() -> ExitCode {
    let cli = Cli::parse();

    let experiment: ExperimentKind = match cli.experiment.parse() {
        Ok(k) => k,
        Err(e) => {
            eprintln!("molcomm: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };

    let mut cfg = match parse_config(&cli.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("molcomm: cannot load config: {e}");
            return ExitCode::from(match e {
                Error::Io { .. } => EXIT_NO_INPUT,
                Error::Config { .. } => EXIT_CONFIG,
                _ => EXIT_DATA,
            });
        }
    };
    if cfg.experiment != experiment {
        eprintln!(
            "molcomm: config {} describes experiment {}, but {} was requested",
            cli.config.display(),
            cfg.experiment,
            experiment
        );
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Some(seed) = cli.seed {
        cfg.sim.rng_seed = seed;
    }
    let out = cli
        .out
        .or_else(|| cfg.output_path.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{experiment}.csv")));

    let table = match compute_experiment(&cfg) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("molcomm: invalid experiment: {e}");
            return ExitCode::from(EXIT_DATA);
        }
    };
    match write_outputs(&cfg, &table, &out) {
        Ok(path) => {
            eprintln!("molcomm: wrote {} rows to {}", table.rows.len(), path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("molcomm: cannot write results: {e}");
            ExitCode::from(EXIT_CANT_CREATE)
        }
    }
}
