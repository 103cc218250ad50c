//! Experiment runners behind the `mom` CLI.
//!
//! Every run draws its randomness from `derive_seed(config.seed, [n, run])`,
//! runs execute in parallel, and results are collected in run order, so a
//! fixed config gives byte-identical CSV output.

mod config;
mod experiments;
mod io;

use std::path::{Path, PathBuf};

pub use config::{
    default_contamination, BoundPath, BreakParams, CalibrateParams, Command, CoverageParams, ExperimentConfig,
    LearningParams,
};
pub use experiments::{
    binomial_upper_tail, run_break_experiment, run_calibrate, run_coverage, run_learning, LearningOutput,
    BREAK_COLUMNS, CALIBRATE_COLUMNS, COVERAGE_COLUMNS, SUMMARY_COLUMNS, TRACE_COLUMNS,
};
pub use io::{parse_dataset, read_csv_dataset, read_results, trace_table, write_results, ResultTable, Value};

use crate::error::Result;

/// Tables produced by one command; the first is the primary result.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub tables: Vec<(&'static str, ResultTable)>,
}

impl Outputs {
    pub fn primary(&self) -> &ResultTable {
        &self.tables[0].1
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Outputs> {
    config.validate()?;
    let tables = match config.command {
        c if c.is_break() => vec![("results", run_break_experiment(config)?)],
        Command::Coverage => vec![("coverage", run_coverage(config)?)],
        Command::LearnRanking | Command::LearnMetric => {
            let out = run_learning(config)?;
            vec![("summary", out.summary), ("traces", out.traces)]
        }
        _ => vec![("calibration", run_calibrate(config)?)],
    };
    Ok(Outputs { tables })
}

/// Writes the primary table to `path`, secondary tables next to it as
/// `<stem>.<name>.csv`, and the config echo as `<stem>.config.json`.
/// Returns the paths written.
pub fn write_outputs(path: &Path, config: &ExperimentConfig, outputs: &Outputs) -> Result<Vec<PathBuf>> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let sibling = |suffix: &str| path.with_file_name(format!("{stem}.{suffix}"));
    let mut written = Vec::new();
    for (i, (name, table)) in outputs.tables.iter().enumerate() {
        let p = if i == 0 {
            path.to_path_buf()
        } else {
            sibling(&format!("{name}.csv"))
        };
        write_results(&p, table)?;
        written.push(p);
    }
    let echo = sibling("config.json");
    std::fs::write(&echo, config.to_json() + "\n")?;
    written.push(echo);
    Ok(written)
}
