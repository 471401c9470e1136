use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Mode};
use super::run::{run_experiment, MetricSummary};
use crate::denoiser::TabularDenoiser;
use crate::error::{Error, Result};
use crate::retro::Reaction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationSuite {
    /// `K` in {1, 2, 4, 6, 8} with the base mode.
    Particles,
    /// `T` in {5, 10, 25, 50, 100}.
    Steps,
    /// First-center budget in {90, 80, 70, 60, 50} out of 100, synthon modes only.
    BudgetSplit,
    /// Product flow with 100 and 400 samples against 100 samples of 4
    /// particles, steered and best-of-4.
    MatchedCompute,
}

impl AblationSuite {
    pub fn as_str(self) -> &'static str {
        match self {
            AblationSuite::Particles => "particles",
            AblationSuite::Steps => "steps",
            AblationSuite::BudgetSplit => "budget-split",
            AblationSuite::MatchedCompute => "matched-compute",
        }
    }

    /// The configurations of the suite, derived from `base`.
    pub fn variants(self, base: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
        let with = |f: &dyn Fn(&mut ExperimentConfig)| {
            let mut c = base.clone();
            f(&mut c);
            c
        };
        Ok(match self {
            AblationSuite::Particles => {
                [1, 2, 4, 6, 8].iter().map(|&k| with(&|c| c.particles = k)).collect()
            }
            AblationSuite::Steps => [5, 10, 25, 50, 100].iter().map(|&t| with(&|c| c.steps = t)).collect(),
            AblationSuite::BudgetSplit => {
                if !base.mode.uses_synthons() {
                    return Err(Error::Config("the budget-split suite needs a synthon mode".into()));
                }
                [90, 80, 70, 60, 50]
                    .iter()
                    .map(|&n1| {
                        with(&|c| {
                            c.samples = 100;
                            c.centers = 2;
                            c.budgets = vec![n1, 100 - n1];
                        })
                    })
                    .collect()
            }
            AblationSuite::MatchedCompute => vec![
                with(&|c| {
                    c.mode = Mode::Rpf;
                    c.samples = 100;
                    c.particles = 1;
                }),
                with(&|c| {
                    c.mode = Mode::Rpf;
                    c.samples = 400;
                    c.particles = 1;
                }),
                with(&|c| {
                    c.mode = Mode::RpfRs;
                    c.samples = 100;
                    c.particles = 4;
                }),
                with(&|c| {
                    c.mode = Mode::Greedy;
                    c.samples = 100;
                    c.particles = 4;
                }),
            ],
        })
    }
}

impl std::str::FromStr for AblationSuite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown ablation suite `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: Mode,
    pub steps: usize,
    pub samples: usize,
    pub particles: usize,
    pub budgets: Vec<usize>,
    pub metrics: MetricSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub suite: AblationSuite,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let ks = self.rows.first().map(|r| r.metrics.ks.clone()).unwrap_or_default();
        let mut s = String::from("suite,mode,steps,samples,particles,budgets");
        for name in ["exact_match", "round_trip", "coverage"] {
            for k in &ks {
                let _ = write!(s, ",{name}@{k}");
            }
        }
        s.push_str(",mean_reward\n");
        for r in &self.rows {
            let budgets = r.budgets.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("/");
            let _ = write!(s, "{},{},{},{},{},{}", self.suite.as_str(), r.mode.as_str(), r.steps, r.samples, r.particles, budgets);
            for v in r.metrics.exact.iter().chain(&r.metrics.round_trip).chain(&r.metrics.coverage) {
                let _ = write!(s, ",{v}");
            }
            let _ = writeln!(s, ",{}", r.metrics.mean_reward);
        }
        s
    }
}

pub fn run_ablation_suite(
    suite: AblationSuite,
    base: &ExperimentConfig,
    model: &TabularDenoiser,
    reactions: &[Reaction],
) -> Result<AblationTable> {
    let mut rows = Vec::new();
    for cfg in suite.variants(base)? {
        let report = run_experiment(&cfg, model, reactions)?;
        rows.push(AblationRow {
            mode: cfg.mode,
            steps: cfg.steps,
            samples: cfg.samples,
            particles: cfg.particles,
            budgets: if cfg.mode.uses_synthons() { cfg.budgets.clone() } else { Vec::new() },
            metrics: report.metrics,
        });
    }
    Ok(AblationTable { suite, rows })
}
