//! Run configuration: one TOML file covering features, model, training and
//! scoring. The resolved config is echoed into every output directory.
//!
//! ```toml
//! seed = 0
//! [feature]
//! mel_bands = 128
//! frames = 5
//! [model]
//! layer_dims = [640, 128, 128, 128, 128, 8, 128, 128, 128, 128, 640]
//! [train]
//! epochs = 100
//! [scoring]
//! mode = "mse"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::FeatureConfig;
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_PAUC_P;
use crate::model::{validate_dims, TrainConfig, BASELINE_DIMS};
use crate::scoring::{ScoreMode, DEFAULT_PERCENTILE, DEFAULT_RIDGE};

pub const RUN_CONFIG_FILE: &str = "run_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Layer widths from input to output; first and last equal the feature
    /// dimension.
    pub layer_dims: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layer_dims: BASELINE_DIMS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub mode: ScoreMode,
    pub ridge: f64,
    pub percentile: f64,
    pub pauc_p: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            mode: ScoreMode::Mse,
            ridge: DEFAULT_RIDGE,
            percentile: DEFAULT_PERCENTILE,
            pauc_p: DEFAULT_PAUC_P,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub data_root: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds model initialization and minibatch shuffling; replaces
    /// `train.seed` on resolution.
    pub seed: u64,
    pub feature: FeatureConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub scoring: ScoringConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(format!("run config: {e}")))?;
        cfg.resolved()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Validated copy with `train.seed` tied to `seed`.
    pub fn resolved(mut self) -> Result<Self> {
        self.train.seed = self.seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.feature.validate()?;
        self.train.validate()?;
        validate_dims(&self.model.layer_dims)?;
        let d = self.feature.input_dim();
        let dims = &self.model.layer_dims;
        if dims[0] != d || dims[dims.len() - 1] != d {
            return Err(Error::Config(format!(
                "model input/output widths {}/{} must equal frames * mel_bands = {d}",
                dims[0],
                dims[dims.len() - 1]
            )));
        }
        let s = &self.scoring;
        if !(s.ridge > 0.0 && s.ridge.is_finite()) {
            return Err(Error::Config(format!("ridge must be positive, got {}", s.ridge)));
        }
        if !(s.percentile > 0.0 && s.percentile <= 100.0) {
            return Err(Error::Config(format!("percentile must be in (0, 100], got {}", s.percentile)));
        }
        if !(s.pauc_p > 0.0 && s.pauc_p <= 1.0) {
            return Err(Error::Config(format!("pauc_p must be in (0, 1], got {}", s.pauc_p)));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serializing run config: {e}")))
    }

    /// Writes the resolved config as `run_config.toml` under `dir`.
    pub fn echo_into(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join(RUN_CONFIG_FILE);
        crate::fsutil::write_atomic(&path, self.to_toml_string()?.as_bytes())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent() {
        let cfg = RunConfig::default().resolved().unwrap();
        assert_eq!(cfg.feature.input_dim(), 640);
        assert_eq!(cfg.model.layer_dims[0], 640);
    }

    #[test]
    fn toml_round_trip_and_seed_resolution() {
        let cfg = RunConfig::from_toml_str("seed = 7\n[train]\nepochs = 3\n[scoring]\nmode = \"mahala\"\n").unwrap();
        assert_eq!(cfg.train.seed, 7);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.scoring.mode, ScoreMode::Mahalanobis);
        let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let err = RunConfig::from_toml_str("[feature]\nmel_bands = 64\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(RunConfig::from_toml_str("[feature]\nmel_bands = 64\n[model]\nlayer_dims = [320, 16, 320]\n").is_ok());
        assert!(RunConfig::from_toml_str("unknown_key = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[scoring]\npercentile = 0\n").is_err());
    }
}
