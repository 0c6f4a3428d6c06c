use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use magtraj::experiment::{run_experiment, Experiment, ExperimentConfig};
use magtraj::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_CHECK: u8 = 3;

/// Runs one desk-scale experiment and writes its tabular output.
///
/// Settings are resolved as: experiment defaults, then the --config file,
/// then command-line flags.
#[derive(Debug, Parser)]
#[command(name = "magtraj", version)]
struct Cli {
    /// fig1_convergence, fig2_stationary, fig3_current, fig4_replay,
    /// fig5_multiqubit, fig6_online, ergodicity, lyapunov or kl_monotone
    experiment: String,

    /// Plain-text file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,

    #[arg(long)]
    dt: Option<f64>,

    /// Total simulated time.
    #[arg(long)]
    time: Option<f64>,

    #[arg(long)]
    seed: Option<u64>,

    /// Data file to write.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    n_qubits: Option<usize>,

    /// euler or kraus.
    #[arg(long)]
    integrator: Option<String>,

    /// Steps between stored samples.
    #[arg(long)]
    stride: Option<usize>,

    /// Read the noise or measurement record from this file.
    #[arg(long)]
    record_in: Option<PathBuf>,

    /// Save the noise or measurement record to this file.
    #[arg(long)]
    record_out: Option<PathBuf>,

    /// Any other config key, e.g. --set gamma=0.005 --set max_order=1000.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Exit with status 3 when an acceptance check fails.
    #[arg(long)]
    check: bool,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let experiment: Experiment = cli.experiment.parse().map_err(Error::InvalidArgument)?;
    let mut config = ExperimentConfig::new(experiment);
    if let Some(path) = &cli.config {
        config.apply_file(path)?;
    }
    for entry in &cli.sets {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("--set expects KEY=VALUE, got '{entry}'")))?;
        config.set(key.trim(), value.trim())?;
    }
    let flags: [(&str, Option<String>); 10] = [
        ("b", cli.b.map(|v| v.to_string())),
        ("dt", cli.dt.map(|v| v.to_string())),
        ("time", cli.time.map(|v| v.to_string())),
        ("seed", cli.seed.map(|v| v.to_string())),
        ("out", cli.out.as_ref().map(|p| p.display().to_string())),
        ("n_qubits", cli.n_qubits.map(|v| v.to_string())),
        ("integrator", cli.integrator.clone()),
        ("stride", cli.stride.map(|v| v.to_string())),
        ("record_in", cli.record_in.as_ref().map(|p| p.display().to_string())),
        ("record_out", cli.record_out.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            config.set(key, &value)?;
        }
    }
    config.validate()?;
    Ok(config)
}

/// Bad input and unwritable paths are configuration errors; everything else
/// is a numerical failure.
fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("magtraj: configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_experiment(&config) {
        Ok(summary) => {
            println!("{summary}");
            if cli.check && !summary.passed() {
                ExitCode::from(EXIT_CHECK)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("magtraj: {} failed: {e}", config.experiment);
            ExitCode::from(exit_code(&e))
        }
    }
}
