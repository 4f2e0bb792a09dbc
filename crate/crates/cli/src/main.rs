use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use quantmimo::channel::ErrorMode;
use quantmimo::sdr::{LmiSign, RelaxOptions};
use quantmimo::sim::{self, InstanceFile, SweepConfig};
use quantmimo::{Error, Result};

/// Robust quantized-precoding simulator for multiuser MIMO downlinks.
#[derive(Debug, Parser)]
#[command(name = "quantmimo", version)]
struct Cli {
    /// Override the master seed of the config or instance.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file: CSV for `sweep` (plus a `.json` sidecar), JSON otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the trial loop.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Channel error distribution (bounded or gaussian).
    #[arg(long, global = true)]
    error_mode: Option<ErrorMode>,
    /// Orientation of the S-procedure block (corrected or as-printed).
    #[arg(long, global = true)]
    lmi_sign: Option<LmiSign>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a BER sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve the robust relaxation of one instance and round it.
    Solve {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Exhaustive search over the output alphabet of one instance.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io { path: p.display().to_string(), msg: e.to_string() }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| Error::Parse(e.to_string()))
}

fn load_instance(cli: &Cli, path: &Path) -> Result<sim::instance::Instance> {
    let mut file = InstanceFile::parse(&read(path)?)?;
    if let Some(seed) = cli.seed {
        file.seed = seed;
    }
    file.resolve()
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        sim::configure_threads(n)?;
    }
    match &cli.command {
        Command::Sweep { config } => {
            let mut cfg: SweepConfig = serde_json::from_str(&read(config)?).map_err(|e| Error::Parse(e.to_string()))?;
            if let Some(seed) = cli.seed {
                cfg.master_seed = seed;
            }
            if let Some(mode) = cli.error_mode {
                cfg.error_mode = mode;
            }
            if let Some(sign) = cli.lmi_sign {
                cfg.settings.lmi_sign = sign;
            }
            let start = Instant::now();
            let result = sim::sweep(&cfg)?;
            let wall = start.elapsed().as_secs_f64();
            for fb in &result.fallbacks {
                eprintln!("warning: {} B={} eta={}: {} trials fell back to guessing", fb.precoder, fb.bits, fb.eta, fb.trials);
            }
            match &cli.out {
                Some(path) => {
                    sim::emit_csv(&result.records, path)?;
                    sim::write_sidecar(&path.with_extension("json"), &cfg, wall, &result.fallbacks)?;
                }
                None => print!("{}", sim::to_csv_string(&result.records)?),
            }
        }
        Command::Solve { instance } => {
            let inst = load_instance(cli, instance)?;
            let report = sim::solve_instance(&inst, cli.lmi_sign.unwrap_or_default(), &RelaxOptions::default())?;
            write_or_print(cli.out.as_deref(), &to_json(&report)?)?;
        }
        Command::Oracle { instance } => {
            let inst = load_instance(cli, instance)?;
            write_or_print(cli.out.as_deref(), &to_json(&sim::oracle_instance(&inst)?)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
