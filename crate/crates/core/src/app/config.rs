//! Run configuration (TOML).
//!
//! ```toml
//! training_data = "data/synthetic_cycling.csv"
//! out = "runs/train"
//! seed = 42
//!
//! [sampler]
//! iterations = 10000
//! burn_in = 0.2
//!
//! [split]
//! ratio = 0.85
//! mode = "random"
//!
//! [estimate]
//! schedule = "schedules/reference.toml"
//! days = 365
//! temperature_c = 25.0
//!
//! [[scenario.cases]]
//! name = "warm"
//! schedule = "schedules/reference.toml"
//! days = 365
//! temperature_c = 30.0
//! ```
//!
//! Relative paths are resolved against the directory of the config file.
//! `[model]` and `[tuning]` override model and proposal defaults field by field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::split::SplitMode;
use super::AppError;
use crate::model::{ModelConfig, TuningDefaults};
use crate::scenario::RepeatFrequency;

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "BATT_BAYES_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub iterations: usize,
    pub burn_in: f64,
    pub thinning: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self { iterations: 10_000, burn_in: 0.2, thinning: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub ratio: f64,
    pub mode: SplitMode,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self { ratio: 0.85, mode: SplitMode::Random }
    }
}

/// Repeat overrides applied on top of a schedule file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceOverrides {
    pub solar: Option<RepeatFrequency>,
    pub freq_regulation: Option<RepeatFrequency>,
    pub peak_shaving: Option<RepeatFrequency>,
}

/// One duty/climate case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    #[serde(default = "default_case_name")]
    pub name: String,
    pub schedule: PathBuf,
    pub days: usize,
    /// Constant ambient temperature.
    pub temperature_c: Option<f64>,
    /// Temperature series (`t_s,value` in °C); takes precedence.
    pub temperature_file: Option<PathBuf>,
    #[serde(default)]
    pub services: ServiceOverrides,
}

fn default_case_name() -> String {
    "estimate".into()
}

impl CaseSpec {
    fn resolve(&mut self, base: &Path) {
        self.schedule = base.join(&self.schedule);
        if let Some(f) = &self.temperature_file {
            self.temperature_file = Some(base.join(f));
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSweep {
    pub cases: Vec<CaseSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub training_data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Directory holding a previous `train` output; defaults to `out`.
    pub trained_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sampler: SamplerSection,
    pub split: SplitSection,
    pub model: ModelConfig,
    pub tuning: TuningDefaults,
    pub estimate: Option<CaseSpec>,
    pub scenario: Option<ScenarioSweep>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub burn_in: Option<f64>,
    pub split: Option<f64>,
    pub split_mode: Option<SplitMode>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, AppError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        let join = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                *x = base_dir.join(&*x);
            }
        };
        join(&mut cfg.training_data);
        join(&mut cfg.out);
        join(&mut cfg.trained_dir);
        if let Some(e) = &mut cfg.estimate {
            e.resolve(base_dir);
        }
        if let Some(s) = &mut cfg.scenario {
            for c in &mut s.cases {
                c.resolve(base_dir);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            AppError::Config(m) => AppError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(i) = o.iterations {
            self.sampler.iterations = i;
        }
        if let Some(b) = o.burn_in {
            self.sampler.burn_in = b;
        }
        if let Some(r) = o.split {
            self.split.ratio = r;
        }
        if let Some(m) = o.split_mode {
            self.split.mode = m;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return Err(AppError::Config(format!("split ratio must lie in (0, 1), got {}", self.split.ratio)));
        }
        if self.sampler.iterations == 0 {
            return Err(AppError::Config("iterations must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.sampler.burn_in) {
            return Err(AppError::Config(format!("burn-in must lie in [0, 1), got {}", self.sampler.burn_in)));
        }
        self.model.validate()?;
        let cases = self.estimate.iter().chain(self.scenario.iter().flat_map(|s| s.cases.iter()));
        for case in cases {
            if !case.schedule.exists() {
                return Err(AppError::Config(format!("schedule file {} does not exist", case.schedule.display())));
            }
            if let Some(f) = &case.temperature_file {
                if !f.exists() {
                    return Err(AppError::Config(format!("temperature file {} does not exist", f.display())));
                }
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> Result<&Path, AppError> {
        self.out
            .as_deref()
            .ok_or_else(|| AppError::Config("no output directory (set `out` or pass --out)".into()))
    }

    pub fn trained_dir(&self) -> Result<&Path, AppError> {
        self.trained_dir.as_deref().map(Ok).unwrap_or_else(|| self.out_dir())
    }

    pub fn training_data(&self) -> Result<&Path, AppError> {
        let p = self
            .training_data
            .as_deref()
            .ok_or_else(|| AppError::Config("no training_data path configured".into()))?;
        if !p.exists() {
            return Err(AppError::Config(format!("training data {} does not exist", p.display())));
        }
        Ok(p)
    }
}

/// Seed precedence: command line, then config file, then the environment,
/// then [`DEFAULT_SEED`].
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>, env: Option<&str>) -> Result<u64, AppError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match env {
        Some(raw) => raw
            .trim()
            .parse()
            .map_err(|_| AppError::Config(format!("{SEED_ENV}='{raw}' is not an unsigned integer"))),
        None => Ok(DEFAULT_SEED),
    }
}
