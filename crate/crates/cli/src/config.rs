//! Run configuration: command-line flags over a TOML file over defaults.

use std::path::{Path, PathBuf};

use mixvix::calibration::ModelKind;
use mixvix::conventions::Conventions;
use mixvix::quantiser::default_cache_dir;
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;

/// Convention overrides; unset fields keep the built-in value.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConventionOverrides {
    pub window_days: Option<f64>,
    pub day_count: Option<f64>,
    pub moneyness_lo: Option<f64>,
    pub moneyness_hi: Option<f64>,
    pub time_nodes: Option<usize>,
    pub min_expiry_days: Option<i64>,
}

impl ConventionOverrides {
    /// `self` wins over `lower` field by field.
    pub fn over(self, lower: Self) -> Self {
        Self {
            window_days: self.window_days.or(lower.window_days),
            day_count: self.day_count.or(lower.day_count),
            moneyness_lo: self.moneyness_lo.or(lower.moneyness_lo),
            moneyness_hi: self.moneyness_hi.or(lower.moneyness_hi),
            time_nodes: self.time_nodes.or(lower.time_nodes),
            min_expiry_days: self.min_expiry_days.or(lower.min_expiry_days),
        }
    }

    pub fn apply(self, base: Conventions) -> Conventions {
        Conventions {
            window_days: self.window_days.unwrap_or(base.window_days),
            day_count: self.day_count.unwrap_or(base.day_count),
            moneyness_lo: self.moneyness_lo.unwrap_or(base.moneyness_lo),
            moneyness_hi: self.moneyness_hi.unwrap_or(base.moneyness_hi),
            time_nodes: self.time_nodes.unwrap_or(base.time_nodes),
            min_expiry_days: self.min_expiry_days.unwrap_or(base.min_expiry_days),
        }
    }
}

/// Calibration overrides.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationOverrides {
    pub starts: Option<usize>,
    pub max_evals: Option<usize>,
    pub polish_xi0: Option<bool>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub model: Option<ModelKind>,
    pub quotes: Option<PathBuf>,
    #[serde(default)]
    pub conventions: ConventionOverrides,
    #[serde(default)]
    pub calibration: CalibrationOverrides,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

/// Settings shared by every subcommand after precedence is resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub cache_dir: PathBuf,
    pub conventions: Conventions,
    pub calibration: CalibrationOverrides,
    file: FileConfig,
}

impl RunConfig {
    pub fn resolve(
        file: FileConfig,
        seed: Option<u64>,
        threads: Option<usize>,
        cache_dir: Option<PathBuf>,
        conventions: ConventionOverrides,
    ) -> Self {
        Self {
            seed: seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            threads: threads.or(file.threads),
            cache_dir: cache_dir
                .or_else(|| file.cache_dir.clone())
                .unwrap_or_else(default_cache_dir),
            conventions: conventions
                .over(file.conventions)
                .apply(Conventions::default()),
            calibration: file.calibration,
            file,
        }
    }

    pub fn model(&self, flag: Option<ModelKind>) -> Result<ModelKind, CliError> {
        flag.or(self.file.model)
            .ok_or_else(|| CliError::Usage("--model is required (flag or config file)".into()))
    }

    pub fn quotes(&self, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
        let path = flag
            .or_else(|| self.file.quotes.clone())
            .ok_or_else(|| CliError::Usage("--quotes is required (flag or config file)".into()))?;
        require_exists(&path)?;
        Ok(path)
    }
}

pub fn require_exists(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "{}: no such file or directory",
            path.display()
        )))
    }
}
