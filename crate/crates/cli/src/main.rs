use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use modeswap_cli::config::{parse_with_overrides, RunConfig};
use modeswap_cli::error::{CliError, CliResult};
use modeswap_cli::{output, runner, Command};

#[derive(Parser)]
#[command(name = "modeswap", version, about = "Parametric mode coupling of a trapped ion")]
struct Cli {
    /// TOML run configuration; every key has a default.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for results.csv and manifest.txt.
    #[arg(short, long, global = true, env = "MODESWAP_OUT", default_value = "modeswap-out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sets a config key, e.g. `--set drive.coupling_hz=5e3`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Occupations and red-sideband probabilities versus pulse length.
    Swap,
    /// Sideband cooling of the primary with SWAPs to the secondary.
    Cool,
    /// Heating-rate measurement of the secondary mode.
    Heatrate,
    /// Sideband spectra across the avoided crossing.
    Crossing,
    /// Carrier and sideband suppression versus drive amplitude.
    Bessel,
    /// Two-mode squeezing at the sum frequency.
    Squeeze,
    /// Checks the config without running dynamics.
    Validate,
}

fn load(cli: &Cli) -> CliResult<RunConfig> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p.display(), e))?,
        None => String::new(),
    };
    let mut cfg = parse_with_overrides(&text, &cli.overrides)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Returns the exit code: 0, or 2 when the config has errors.
fn validate(cfg: &RunConfig) -> u8 {
    let report = runner::validate(cfg);
    for w in &report.warnings {
        println!("warning key={} msg={:?}", w.key, w.message);
    }
    for e in &report.errors {
        eprintln!("{}", CliError::config(e.key.clone(), e.message.clone()));
    }
    println!("{} errors, {} warnings", report.errors.len(), report.warnings.len());
    if report.errors.is_empty() {
        0
    } else {
        2
    }
}

fn execute(cmd: Command, cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let start = Instant::now();
    let result = runner::run(cmd, cfg)?;
    output::write(out, cmd.name(), cfg, &result, start.elapsed().as_secs_f64())?;
    for (name, v, e) in &result.observables {
        println!("{name} = {v:.11e} +- {e:.4e}");
    }
    println!("wrote {}", out.join("results.csv").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|cfg| {
        let cmd = match cli.command {
            Sub::Validate => return Ok(validate(&cfg)),
            Sub::Swap => Command::Swap,
            Sub::Cool => Command::Cool,
            Sub::Heatrate => Command::Heatrate,
            Sub::Crossing => Command::Crossing,
            Sub::Bessel => Command::Bessel,
            Sub::Squeeze => Command::Squeeze,
        };
        execute(cmd, &cfg, &cli.out).map(|()| 0)
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
