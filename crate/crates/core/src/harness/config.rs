use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::denoiser::{Featurizer, PointEstimate, TrainConfig};
use crate::error::{Error, Result};
use crate::flow::Stepper;
use crate::retro::{GenConfig, DEFAULT_KS};
use crate::steering::{ResampleMode, SteeringConfig};

/// Sampling strategy for one evaluation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Flow from the padded product.
    Rpf,
    /// Flow from the synthons of the top predicted centers.
    Rsf,
    /// `Rpf` with reward steering.
    RpfRs,
    /// `Rsf` with reward steering.
    RsfRs,
    /// `Rpf` keeping the best of `particles` independent trajectories.
    Greedy,
}

impl Mode {
    pub fn uses_synthons(self) -> bool {
        matches!(self, Mode::Rsf | Mode::RsfRs)
    }

    pub fn is_steered(self) -> bool {
        matches!(self, Mode::RpfRs | Mode::RsfRs)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Rpf => "rpf",
            Mode::Rsf => "rsf",
            Mode::RpfRs => "rpf-rs",
            Mode::RsfRs => "rsf-rs",
            Mode::Greedy => "greedy",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown mode `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Test reactions, one JSON record per line.
    pub dataset: PathBuf,
    /// Trained checkpoint.
    pub model: PathBuf,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_centers")]
    pub centers: usize,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<usize>,
    #[serde(default)]
    pub stepper: Stepper,
    #[serde(default)]
    pub resample: ResampleMode,
    #[serde(default = "default_ess_fraction")]
    pub ess_fraction: f64,
    #[serde(default)]
    pub point_estimate: PointEstimate,
    #[serde(default = "default_dummy_count")]
    pub dummy_count: usize,
    #[serde(default)]
    pub seed: u64,
    /// Evaluate only the first `limit` test reactions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    #[serde(default)]
    pub dump_predictions: bool,
}

fn default_steps() -> usize {
    50
}
fn default_samples() -> usize {
    100
}
fn default_particles() -> usize {
    4
}
fn default_lambda() -> f64 {
    1.0
}
fn default_centers() -> usize {
    2
}
fn default_budgets() -> Vec<usize> {
    vec![70, 30]
}
fn default_ess_fraction() -> f64 {
    0.5
}
fn default_dummy_count() -> usize {
    10
}
fn default_ks() -> Vec<usize> {
    DEFAULT_KS.to_vec()
}

impl ExperimentConfig {
    pub fn new(mode: Mode, dataset: impl Into<PathBuf>, model: impl Into<PathBuf>) -> Self {
        Self {
            mode,
            dataset: dataset.into(),
            model: model.into(),
            steps: default_steps(),
            samples: default_samples(),
            particles: default_particles(),
            lambda: default_lambda(),
            centers: default_centers(),
            budgets: default_budgets(),
            stepper: Stepper::default(),
            resample: ResampleMode::default(),
            ess_fraction: default_ess_fraction(),
            point_estimate: PointEstimate::default(),
            dummy_count: default_dummy_count(),
            seed: 0,
            limit: None,
            ks: default_ks(),
            dump_predictions: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.steps == 0 || self.samples == 0 || self.particles == 0 {
            return bad("steps, samples and particles must be positive".into());
        }
        if self.dummy_count < 2 {
            return bad("dummy_count must leave room for two leaving groups".into());
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return bad("ks must be non-empty positive ranks".into());
        }
        if self.mode.uses_synthons() {
            if self.centers == 0 || self.budgets.len() != self.centers {
                return bad(format!("{} budgets for {} centers", self.budgets.len(), self.centers));
            }
            let sum: usize = self.budgets.iter().sum();
            if sum != self.samples {
                return Err(Error::BudgetMismatch { sum, expected: self.samples });
            }
        }
        self.steering().validate()
    }

    pub fn steering(&self) -> SteeringConfig {
        SteeringConfig {
            particles: self.particles,
            lambda: self.lambda,
            resample: self.resample,
            ess_fraction: self.ess_fraction,
            stepper: self.stepper,
            point_estimate: self.point_estimate,
        }
    }

    /// Reads and validates a JSON config; relative paths resolve against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.dataset = resolve(base, &cfg.dataset);
        cfg.model = resolve(base, &cfg.model);
        cfg.validate()?;
        Ok(cfg)
    }
}

pub(crate) fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() || base.as_os_str().is_empty() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Settings for `train`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainJob {
    /// Training reactions, one JSON record per line.
    pub dataset: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dummy_count")]
    pub dummy_count: usize,
    /// Also learn synthon-to-reactant flows.
    #[serde(default = "default_true")]
    pub synthon_pairs: bool,
    #[serde(default = "default_featurizer")]
    pub featurizer: Featurizer,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_true() -> bool {
    true
}
fn default_featurizer() -> Featurizer {
    Featurizer::Graph
}

impl TrainJob {
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            seed: 0,
            dummy_count: default_dummy_count(),
            synthon_pairs: true,
            featurizer: default_featurizer(),
            train: TrainConfig::default(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut job: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        job.dataset = resolve(path.parent().unwrap_or(Path::new(".")), &job.dataset);
        Ok(job)
    }
}

/// Settings for `gen-data`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenJob {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub generator: GenConfig,
}

impl GenJob {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"mode": "rpf", "dataset": "d", "model": "m", "stepz": 3}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(text).is_err());
        let ok = r#"{"mode": "rsf-rs", "dataset": "d", "model": "m"}"#;
        let cfg: ExperimentConfig = serde_json::from_str(ok).unwrap();
        assert_eq!(cfg, ExperimentConfig::new(Mode::RsfRs, "d", "m"));
        cfg.validate().unwrap();
    }

    #[test]
    fn budgets_must_cover_the_samples() {
        let mut cfg = ExperimentConfig::new(Mode::Rsf, "d", "m");
        cfg.budgets = vec![60, 30];
        assert!(matches!(cfg.validate(), Err(Error::BudgetMismatch { sum: 90, expected: 100 })));
        cfg.mode = Mode::Rpf;
        cfg.validate().unwrap();
        cfg.particles = 0;
        assert!(cfg.validate().is_err());
    }
}
