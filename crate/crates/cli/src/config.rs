//! Experiment manifest and the merged settings every command runs with.
//! Precedence: flag, then manifest, then built-in default.

use std::fs;
use std::path::{Path, PathBuf};

use relate_core::attacks::DEFAULT_EPSILON;
use relate_core::detection::{DEFAULT_PERCENTILE, DEFAULT_THRESHOLD};
use relate_core::pipeline::{RunConfig, RANDOM_DRAWS};
use relate_core::similarity::Metric;
use serde::Deserialize;

use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_PBD: &str = "pbd";

/// Contents of a `--config` TOML file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub threshold: Option<f64>,
    pub percentile: Option<f64>,
    pub metric: Option<Metric>,
    pub pbd: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1));
            CliError::Manifest {
                path: path.to_path_buf(),
                line,
                msg: e.message().to_string(),
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub epsilon: f64,
    pub threshold: f64,
    pub percentile: f64,
    pub metric: Metric,
    pub pbd: PathBuf,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Settings {
    /// `flags` holds the command-line values in manifest shape.
    pub fn resolve(flags: Manifest, manifest: Manifest) -> Self {
        Self {
            seed: flags.seed.or(manifest.seed).unwrap_or(DEFAULT_SEED),
            epsilon: flags.epsilon.or(manifest.epsilon).unwrap_or(DEFAULT_EPSILON),
            threshold: flags.threshold.or(manifest.threshold).unwrap_or(DEFAULT_THRESHOLD),
            percentile: flags.percentile.or(manifest.percentile).unwrap_or(DEFAULT_PERCENTILE),
            metric: flags.metric.or(manifest.metric).unwrap_or(Metric::Cosine),
            pbd: flags.pbd.or(manifest.pbd).unwrap_or_else(|| PathBuf::from(DEFAULT_PBD)),
            out: flags.out.or(manifest.out),
            jobs: flags.jobs.or(manifest.jobs),
        }
    }

    /// Validated run configuration.
    pub fn run_config(&self) -> Result<RunConfig> {
        let cfg = RunConfig {
            seed: self.seed,
            epsilon: self.epsilon,
            threshold: self.threshold,
            percentile: self.percentile,
            metric: self.metric,
            random_draws: RANDOM_DRAWS,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}
