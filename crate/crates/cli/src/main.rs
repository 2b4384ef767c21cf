//! `fermiohm run` and `fermiohm validate`.

use clap::{Parser, Subcommand};
use fermiohm::config::Config;
use fermiohm::experiment::{self, RunOutcome};
use fermiohm::Error as CoreError;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "fermiohm", version, about = "Exact-diagonalization transport experiments for driven lattice fermions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "FERMIOHM_WORKERS", default_value_t = default_workers())]
        workers: usize,
        /// Replace `[disorder] seed`.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Check a config without running it; lists every violation.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_NUMERIC,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Parse(_) | CoreError::Validation(_) | CoreError::Domain(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<(String, Config), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let config = Config::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok((text, config))
}

fn write_outputs(out: &Path, outcome: &RunOutcome, manifest: &serde_json::Value) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Runtime(format!("writing {}: {e}", out.display()));
    std::fs::create_dir_all(out).map_err(io)?;
    for a in &outcome.artifacts {
        std::fs::write(out.join(&a.name), &a.bytes).map_err(io)?;
    }
    let summary = serde_json::to_string_pretty(&outcome.summary).expect("summary serializes");
    std::fs::write(out.join("summary.json"), summary + "\n").map_err(io)?;
    let manifest = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(out.join("manifest.json"), manifest + "\n").map_err(io)?;
    Ok(())
}

fn run(config_path: &Path, out: &Path, workers: usize, seed_override: Option<u64>) -> Result<bool, CliError> {
    let started = Instant::now();
    let (text, mut config) = load(config_path)?;
    if let Some(seed) = seed_override {
        config.disorder.seed = seed;
    }
    let base = config_path.parent();
    let diagnostics = config.validate(base);
    if !diagnostics.is_empty() {
        let list: Vec<String> = diagnostics.iter().map(|d| format!("  {d}")).collect();
        return Err(CliError::Usage(format!("invalid config {}:\n{}", config_path.display(), list.join("\n"))));
    }
    let outcome = experiment::run(&config, base, workers).map_err(|e| match e {
        CoreError::Parse(_) | CoreError::Validation(_) => CliError::Usage(e.to_string()),
        other => CliError::Runtime(format!("numeric failure: {other}")),
    })?;
    let manifest = json!({
        "experiment": outcome.kind.name(),
        "config_hash": Config::hash(&text),
        "seed": outcome.seed,
        "versions": {
            "fermiohm": env!("CARGO_PKG_VERSION"),
            "format": 1,
        },
        "platform": { "os": std::env::consts::OS, "arch": std::env::consts::ARCH },
        "workers": workers,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "pass": outcome.pass,
    });
    write_outputs(out, &outcome, &manifest)?;
    println!("{}: {}", outcome.kind.name(), if outcome.pass { "PASS" } else { "FAIL" });
    Ok(outcome.pass)
}

fn validate(config_path: &Path) -> Result<bool, CliError> {
    let (_, config) = load(config_path)?;
    let diagnostics = config.validate(config_path.parent());
    for d in &diagnostics {
        println!("{d}");
    }
    Ok(diagnostics.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out, workers, seed_override } => run(config, out, *workers, *seed_override),
        Command::Validate { config } => validate(config).map(|ok| {
            if ok {
                println!("config is valid");
            }
            ok
        }),
    };
    match (result, &cli.command) {
        (Ok(true), _) => ExitCode::SUCCESS,
        (Ok(false), Command::Validate { .. }) => ExitCode::from(EXIT_USAGE),
        (Ok(false), Command::Run { .. }) => ExitCode::from(EXIT_FAIL),
        (Err(e), _) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
