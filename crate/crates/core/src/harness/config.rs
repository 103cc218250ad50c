use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::{AlphaMapping, MappingKind};
use crate::contamination::{ContaminationSpec, InlierDist, OutlierRule, Placement};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Command {
    BreakMean,
    BreakMedian,
    BreakVariance,
    MannWhitney,
    Coverage,
    LearnRanking,
    LearnMetric,
    Calibrate,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::BreakMean,
        Command::BreakMedian,
        Command::BreakVariance,
        Command::MannWhitney,
        Command::Coverage,
        Command::LearnRanking,
        Command::LearnMetric,
        Command::Calibrate,
    ];

    pub fn is_break(&self) -> bool {
        matches!(
            self,
            Command::BreakMean | Command::BreakMedian | Command::BreakVariance | Command::MannWhitney
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundPath {
    Chebyshev,
    SubGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BreakParams {
    /// Fraction trimmed from each tail by the trimmed-mean baseline.
    pub trim: f64,
}

impl Default for BreakParams {
    fn default() -> Self {
        BreakParams { trim: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverageParams {
    pub epsilons: Vec<f64>,
    pub path: BoundPath,
    /// Explicit levels as `ln δ`; when absent, `points` levels spanning the
    /// admissible range are used.
    pub ln_deltas: Option<Vec<f64>>,
    pub points: usize,
    /// Significance level of the one-sided binomial test.
    pub test_level: f64,
}

impl Default for CoverageParams {
    fn default() -> Self {
        CoverageParams {
            epsilons: vec![0.0, 0.05, 0.1],
            path: BoundPath::Chebyshev,
            ln_deltas: None,
            points: 5,
            test_level: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningParams {
    /// Held-out rows; `n_grid` gives the training sizes.
    pub n_test: usize,
    pub epochs: usize,
    /// Initial step `γ₀`; defaults to 0.03 for ranking and 0.3 for metric
    /// learning.
    pub gamma0: Option<f64>,
    /// Defaults to 5% for ranking and 10% for metric learning.
    pub outlier_fraction: Option<f64>,
    /// Ranking: feature dimension, label noise and the outlier location `λ`.
    pub p: usize,
    pub noise_sd: f64,
    pub lambda: f64,
    pub box_width: Option<f64>,
    /// Metric learning: dimension, class count, centre spread and the
    /// outlier box `[lo, hi]^q` with its label.
    pub q: usize,
    pub classes: usize,
    pub spread: f64,
    pub box_lo: f64,
    pub box_hi: f64,
    pub box_label: f64,
    /// When set, overrides the block count derived from the mapping.
    pub k: Option<usize>,
    /// Ranking starts from `w₀ ~ N(0, init_scale² I)`; at `w₀ = 0` every
    /// pair has the same surrogate loss and the first median block is
    /// arbitrary.
    pub init_scale: f64,
}

impl Default for LearningParams {
    fn default() -> Self {
        LearningParams {
            n_test: 200,
            epochs: 200,
            gamma0: None,
            outlier_fraction: None,
            p: 3,
            noise_sd: 0.5,
            lambda: 50.0,
            box_width: None,
            q: 4,
            classes: 3,
            spread: 2.0,
            box_lo: 0.0,
            box_hi: 5.0,
            box_label: 2.0,
            k: None,
            init_scale: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrateParams {
    pub epsilons: Vec<f64>,
}

impl Default for CalibrateParams {
    fn default() -> Self {
        CalibrateParams {
            epsilons: (0..10).map(|i| i as f64 * 0.05).collect(),
        }
    }
}

fn harmonic() -> MappingKind {
    MappingKind::Harmonic
}

fn one() -> usize {
    1
}

/// Everything needed to reproduce one experiment, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub n_grid: Vec<usize>,
    #[serde(default = "one")]
    pub runs: usize,
    #[serde(default = "harmonic")]
    pub mapping: MappingKind,
    /// Defaults to the command's preset.
    #[serde(default)]
    pub contamination: Option<ContaminationSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub break_params: BreakParams,
    #[serde(default)]
    pub coverage: CoverageParams,
    #[serde(default)]
    pub learning: LearningParams,
    #[serde(default)]
    pub calibrate: CalibrateParams,
}

impl ExperimentConfig {
    /// Defaults for `command` with one sample size.
    pub fn preset(command: Command, n: usize, runs: usize) -> Self {
        ExperimentConfig {
            command,
            n_grid: vec![n],
            runs,
            mapping: MappingKind::Harmonic,
            contamination: None,
            seed: 0,
            output: None,
            break_params: BreakParams::default(),
            coverage: CoverageParams::default(),
            learning: LearningParams::default(),
            calibrate: CalibrateParams::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| e.context(format!("reading {}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.n_grid.is_empty() {
            return Err(Error::Config("n_grid must be nonempty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be strictly ascending".into()));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::Config("sample sizes must be >= 2".into()));
        }
        if self.mapping == MappingKind::Custom {
            return Err(Error::Config("custom mappings cannot be configured from JSON".into()));
        }
        let t = self.break_params.trim;
        if !(0.0..0.5).contains(&t) {
            return Err(Error::Config(format!("trim must lie in [0, 1/2), got {t}")));
        }
        if self.command == Command::Coverage {
            let c = &self.coverage;
            if c.epsilons.is_empty() || c.epsilons.iter().any(|e| !(0.0..0.5).contains(e)) {
                return Err(Error::Config(
                    "coverage epsilons must be nonempty and in [0, 1/2)".into(),
                ));
            }
            if c.ln_deltas.is_none() && c.points == 0 {
                return Err(Error::Config("coverage needs points >= 1 or explicit ln_deltas".into()));
            }
        }
        Ok(())
    }

    pub fn alpha_mapping(&self) -> AlphaMapping {
        AlphaMapping::named(self.mapping).expect("validated: named mapping")
    }

    pub fn contamination_spec(&self) -> ContaminationSpec {
        self.contamination
            .clone()
            .unwrap_or_else(|| default_contamination(self.command))
    }
}

/// `n_O = ⌈√n⌉` presets; Mann-Whitney puts 10% at `n = 10⁴` (`C_O² = 10`).
pub fn default_contamination(command: Command) -> ContaminationSpec {
    let shuffle = Placement::Shuffle { seed: 0x5eed };
    match command {
        Command::BreakMedian => ContaminationSpec::sqrt_n(
            InlierDist::Bernoulli { p: 0.5 },
            OutlierRule::DiracAt { value: 1.0 },
            shuffle,
        ),
        Command::BreakVariance => ContaminationSpec::sqrt_n(
            InlierDist::Uniform { lo: 0.0, hi: 1.0 },
            OutlierRule::DiracPower { exponent: 0.25 },
            shuffle,
        ),
        Command::MannWhitney => ContaminationSpec {
            c_o: 10f64.sqrt(),
            ..ContaminationSpec::sqrt_n(
                InlierDist::Gaussian { mean: 0.0, sd: 1.0 },
                OutlierRule::DiracPower { exponent: 0.5 },
                shuffle,
            )
        },
        Command::Coverage => ContaminationSpec::sqrt_n(
            InlierDist::StudentT { dof: 3.0 },
            OutlierRule::DiracPower { exponent: 0.5 },
            shuffle,
        ),
        _ => ContaminationSpec::sqrt_n(
            InlierDist::Gaussian { mean: 0.0, sd: 1.0 },
            OutlierRule::DiracPower { exponent: 0.5 },
            shuffle,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"command":"BreakMean","n_grid":[100,1000]}"#).unwrap();
        assert_eq!(cfg.runs, 1);
        assert_eq!(cfg.mapping, MappingKind::Harmonic);
        assert_eq!(cfg.contamination_spec().c_o, 1.0);
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::preset(Command::Coverage, 500, 10);
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        for text in [
            r#"{"command":"BreakMean","n_grid":[]}"#,
            r#"{"command":"BreakMean","n_grid":[100,50]}"#,
            r#"{"command":"BreakMean","n_grid":[100],"runs":0}"#,
            r#"{"command":"Nope","n_grid":[100]}"#,
            r#"{"command":"BreakMean","n_grid":[100],"typo":1}"#,
        ] {
            let e = ExperimentConfig::from_json(text).unwrap_err();
            assert!(e.is_config_error(), "{text}: {e}");
        }
    }
}
