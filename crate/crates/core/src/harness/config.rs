use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::DEFAULT_THRESHOLDS_DEG;
use crate::alignment::{InitMode, StopCriteria, DEFAULT_MAX_ITERATIONS, DEFAULT_TAU_DEG};
use crate::error::{Error, Result};
use crate::estimator::EstimatorKind;
use crate::mulaw::{BinningScheme, DEFAULT_BINS, DEFAULT_MU};
use crate::renderer::{DescriptorConfig, NoiseSpec, DEFAULT_RESOLUTION, MIN_RESOLUTION};

pub const EXPERIMENT_FORMAT: &str = "experiment";
pub const EXPERIMENT_VERSION: u32 = 1;

fn default_bins() -> usize {
    DEFAULT_BINS
}
fn default_mu() -> f64 {
    DEFAULT_MU
}
fn default_tau() -> [f64; 3] {
    [DEFAULT_TAU_DEG; 3]
}
fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}
fn default_resolution() -> [usize; 2] {
    [DEFAULT_RESOLUTION.0, DEFAULT_RESOLUTION.1]
}
fn default_elevation_range() -> [f64; 2] {
    [-30.0, 60.0]
}
fn default_tilt_range() -> [f64; 2] {
    [0.0, 0.0]
}
fn default_thresholds() -> Vec<f64> {
    DEFAULT_THRESHOLDS_DEG.to_vec()
}

/// A batch of alignment trials against pseudo-real targets: the template,
/// slightly reshaped, rendered at a random viewpoint with corrupted
/// descriptors.
///
/// Relative paths are resolved against the configuration file's directory.
/// Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format: String,
    pub version: u32,
    pub template: PathBuf,
    pub estimator: EstimatorKind,
    #[serde(default = "default_bins")]
    pub n_bins: usize,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_tau")]
    pub tau: [f64; 3],
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub init: InitMode,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_resolution")]
    pub resolution: [usize; 2],
    #[serde(default)]
    pub descriptor: DescriptorConfig,
    #[serde(default)]
    pub target_noise: NoiseSpec,
    /// Largest relative per-axis scale change of the target shape.
    #[serde(default)]
    pub shape_scale: f64,
    /// Standard deviation of per-keypoint position jitter, in model units.
    #[serde(default)]
    pub shape_sigma: f64,
    #[serde(default = "default_elevation_range")]
    pub elevation_range: [f64; 2],
    #[serde(default = "default_tilt_range")]
    pub tilt_range: [f64; 2],
    #[serde(default = "default_thresholds")]
    pub thresholds_deg: Vec<f64>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Parses, resolves relative paths against `base_dir` and validates.
    pub fn from_json_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c: Self = serde_json::from_str(text)?;
        if c.template.is_relative() {
            c.template = base_dir.join(&c.template);
        }
        if c.output_dir.is_relative() {
            c.output_dir = base_dir.join(&c.output_dir);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json_str(&text, base).map_err(|e| match e {
            Error::Json(j) => Error::Format { path: path.display().to_string(), reason: j.to_string() },
            other => other,
        })
    }

    pub fn stop(&self) -> StopCriteria {
        StopCriteria { tau: self.tau, max_iterations: self.max_iterations }
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.resolution[0], self.resolution[1])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.format != EXPERIMENT_FORMAT || self.version != EXPERIMENT_VERSION {
            return bad(format!(
                "expected format \"{EXPERIMENT_FORMAT}\" version {EXPERIMENT_VERSION}, got \"{}\" version {}",
                self.format, self.version
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !self.template.is_file() {
            return bad(format!("template {} does not exist", self.template.display()));
        }
        if self.resolution.iter().any(|&r| r < MIN_RESOLUTION) {
            return bad(format!("resolution must be at least {MIN_RESOLUTION} per side, got {:?}", self.resolution));
        }
        if !(self.shape_scale.is_finite() && (0.0..0.5).contains(&self.shape_scale)) {
            return bad(format!("shape_scale must be in [0, 0.5), got {}", self.shape_scale));
        }
        if !(self.shape_sigma.is_finite() && self.shape_sigma >= 0.0) {
            return bad(format!("shape_sigma must be >= 0, got {}", self.shape_sigma));
        }
        for (name, [lo, hi]) in [("elevation_range", self.elevation_range), ("tilt_range", self.tilt_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= -180.0 && hi <= 180.0) {
                return bad(format!("{name} must be an ordered pair within [-180, 180], got [{lo}, {hi}]"));
            }
        }
        if self.thresholds_deg.is_empty() || self.thresholds_deg.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad(format!("thresholds_deg must be non-empty and positive, got {:?}", self.thresholds_deg));
        }
        BinningScheme::<f64>::new(self.n_bins, self.mu)?;
        self.stop().validate()?;
        self.init.validate()?;
        self.estimator.validate()?;
        self.target_noise.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(extra: &str) -> String {
        format!(
            r#"{{"format": "experiment", "version": 1, "template": "chair.json",
                "estimator": {{"kind": "oracle"}}, "trials": 3, "seed": 0, "output_dir": "out"{extra}}}"#
        )
    }

    fn base() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../templates")
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json_str(&text(""), &base()).unwrap();
        assert_eq!(c.n_bins, 20);
        assert_eq!(c.mu, 255.0);
        assert_eq!(c.stop(), StopCriteria::default());
        assert_eq!(c.init, InitMode::default());
        assert_eq!(c.thresholds_deg, vec![30.0, 22.5, 15.0]);
        assert_eq!(c.output_dir, base().join("out"));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let b = base();
        assert!(ExperimentConfig::from_json_str(&text(r#", "typo": 1"#), &b).is_err());
        assert!(ExperimentConfig::from_json_str(&text("").replace("\"trials\": 3", "\"trials\": 0"), &b).is_err());
        assert!(ExperimentConfig::from_json_str(&text("").replace("chair.json", "missing.json"), &b).is_err());
        assert!(ExperimentConfig::from_json_str(&text("").replace("\"version\": 1", "\"version\": 2"), &b).is_err());
        assert!(ExperimentConfig::from_json_str(&text(r#", "n_bins": 1"#), &b).is_err());
        assert!(ExperimentConfig::from_json_str(&text(r#", "tau": [1, 0, 1]"#), &b).is_err());
        assert!(ExperimentConfig::from_json_str(&text(r#", "elevation_range": [10, -10]"#), &b).is_err());
        assert!(ExperimentConfig::from_json_str(&text(r#", "target_noise": {"sigma": 0.1, "dropout": 2}"#), &b).is_err());
        assert!(ExperimentConfig::from_json_str(&text("").replace("\"seed\": 0, ", ""), &b).is_err());
    }
}
