use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use mom_core::harness::{self, Command, ExperimentConfig};
use mom_core::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "kebab-case")]
enum Cmd {
    BreakMean,
    BreakMedian,
    BreakVariance,
    MannWhitney,
    Coverage,
    LearnRanking,
    LearnMetric,
    Calibrate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::BreakMean => Command::BreakMean,
            Cmd::BreakMedian => Command::BreakMedian,
            Cmd::BreakVariance => Command::BreakVariance,
            Cmd::MannWhitney => Command::MannWhitney,
            Cmd::Coverage => Command::Coverage,
            Cmd::LearnRanking => Command::LearnRanking,
            Cmd::LearnMetric => Command::LearnMetric,
            Cmd::Calibrate => Command::Calibrate,
        }
    }
}

/// Robust estimation experiments: median-of-means, median-of-U-statistics
/// and MoU gradient descent under contamination.
#[derive(Debug, Parser)]
#[command(name = "mom", version)]
struct Cli {
    command: Cmd,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; defaults to the config's `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config_error() { EXIT_CONFIG } else { EXIT_NUMERIC })
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut config = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let command = Command::from(cli.command);
    if config.command != command {
        return fail(&Error::Config(format!(
            "command {command:?} does not match config command {:?}",
            config.command
        )));
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output = Some(out);
    }
    let outputs = match harness::run(&config) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    match &config.output {
        Some(path) => match harness::write_outputs(path, &config, &outputs) {
            Ok(paths) => {
                for p in paths {
                    eprintln!("wrote {}", p.display());
                }
            }
            Err(e) => return fail(&e),
        },
        None => print!("{}", outputs.primary().to_csv_string()),
    }
    ExitCode::SUCCESS
}
