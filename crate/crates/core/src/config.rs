//! Experiment configuration read from TOML.
//!
//! ```toml
//! mode = "simulate"        # or "real" with `data = "cohort.csv"`
//! n = 50                   # patients per subgroup
//! p = 100
//! epsilon = 0.5
//! repetitions = 20
//! seed = 1
//! output_dir = "report"
//! models = ["estimated:lasso", "fixed:0.5", "subgroup", "all"]
//!
//! [path]
//! n_lambda = 100
//!
//! [classifier.forest]
//! n_trees = 500
//! ```
//!
//! The environment variables `SUBCOX_SEED` and `SUBCOX_OUTPUT_DIR` override
//! `seed` and `output_dir`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cox::PathConfig;
use crate::error::{Error, Result};
use crate::pipeline::{DataSource, ExperimentSpec, FitSettings, ModelSuite};
use crate::simulate::SimulationScenario;
use crate::weights::ClassifierParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub epsilon: Option<f64>,
    pub data: Option<PathBuf>,
    #[serde(default = "default_proportion")]
    pub proportion: f64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub models: ModelSuite,
    #[serde(default = "default_folds")]
    pub cox_folds: usize,
    #[serde(default = "default_folds")]
    pub classifier_folds: usize,
    #[serde(default)]
    pub path: PathConfig,
    #[serde(default)]
    pub classifier: ClassifierParams,
}

fn default_proportion() -> f64 {
    0.632
}

fn default_repetitions() -> usize {
    100
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("subcox-report")
}

fn default_folds() -> usize {
    10
}

impl ExperimentConfig {
    /// Parses and validates; relative data paths resolve against `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut config: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        if let Some(data) = &config.data {
            if data.is_relative() {
                config.data = Some(base.join(data));
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Reads the file, applies the environment overrides, then validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut config = Self::from_toml_str(&text, base)?;
        config.apply_overrides(|k| std::env::var(k).ok())?;
        config.validate()?;
        Ok(config)
    }

    /// Applies `SUBCOX_SEED` and `SUBCOX_OUTPUT_DIR` from `lookup`.
    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(seed) = lookup("SUBCOX_SEED") {
            self.seed = seed
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("SUBCOX_SEED '{seed}' is not an unsigned integer")))?;
        }
        if let Some(dir) = lookup("SUBCOX_OUTPUT_DIR") {
            self.output_dir = PathBuf::from(dir);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.cox_folds < 2 || self.classifier_folds < 2 {
            return bad("fold counts must be at least 2".into());
        }
        if self.classifier.forest.n_trees == 0 {
            return bad("classifier.forest.n_trees must be at least 1".into());
        }
        match self.mode {
            Mode::Simulate => {
                let (Some(n), Some(p), Some(eps)) = (self.n, self.p, self.epsilon) else {
                    return bad("simulate mode needs n, p and epsilon".into());
                };
                if self.data.is_some() {
                    return bad("simulate mode takes no data file".into());
                }
                self.scenario(n, p, eps).map(|_| ())
            }
            Mode::Real => {
                let Some(data) = &self.data else {
                    return bad("real mode needs a data file".into());
                };
                if self.n.is_some() || self.p.is_some() || self.epsilon.is_some() {
                    return bad("real mode takes no n, p or epsilon".into());
                }
                if !data.is_file() {
                    return bad(format!("data file {} does not exist", data.display()));
                }
                if !(self.proportion > 0.0 && self.proportion < 1.0) {
                    return bad(format!("proportion {} must lie in (0, 1)", self.proportion));
                }
                Ok(())
            }
        }
    }

    fn scenario(&self, n: usize, p: usize, epsilon: f64) -> Result<SimulationScenario> {
        SimulationScenario::new(n, p, epsilon, self.seed).map_err(|e| Error::Config(e.to_string()))
    }

    /// Resolves the configuration into a runnable experiment, reading the
    /// data file in real mode.
    pub fn to_spec(&self) -> Result<ExperimentSpec> {
        self.validate()?;
        let mut settings = FitSettings {
            path: self.path.clone(),
            cox_folds: self.cox_folds,
            classifier_folds: self.classifier_folds,
            classifier: self.classifier.clone(),
            group_one: Vec::new(),
        };
        let source = match self.mode {
            Mode::Simulate => {
                settings.group_one = vec![0, 1];
                DataSource::Simulated(self.scenario(
                    self.n.expect("validated"),
                    self.p.expect("validated"),
                    self.epsilon.expect("validated"),
                )?)
            }
            Mode::Real => DataSource::Dataset {
                data: crate::io::read_dataset(self.data.as_ref().expect("validated"))?,
                proportion: self.proportion,
            },
        };
        Ok(ExperimentSpec {
            source,
            repetitions: self.repetitions,
            master_seed: self.seed,
            suite: self.models.clone(),
            settings,
        })
    }
}
