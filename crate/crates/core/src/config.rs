//! Run configuration: a TOML file whose every field is optional, overridden
//! field by field by command-line flags.
//!
//! ```toml
//! stride = 2
//! method = "full"            # full | camera-only | traditional-ba
//!
//! [optimizer]
//! camera_iterations = 2000
//! deformation_iterations = 2000
//! seed = 0
//!
//! [optimizer.learning_rates]
//! vertices = 1e-3
//!
//! [weights]
//! flip = 10.0
//!
//! [eval]
//! holdout = 5
//! alphas = [0.01, 0.03, 0.05]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::LossWeights;
use crate::error::{Error, Result};
use crate::optimizer::{AlignOptions, DataTerm, OptimizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Camera stage followed by the deformation stage.
    #[default]
    Full,
    CameraOnly,
    /// One free 3D point per correspondence, no depth and no deformation.
    TraditionalBa,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Full, Method::CameraOnly, Method::TraditionalBa];

    pub fn name(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::CameraOnly => "camera-only",
            Method::TraditionalBa => "traditional-ba",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Correspondences held out of alignment.
    pub holdout: usize,
    /// PCC radii as fractions of the longest image side.
    pub alphas: Vec<f64>,
    /// Seed of the holdout split.
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            holdout: 5,
            alphas: vec![0.03],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub optimizer: OptimizerConfig,
    pub weights: LossWeights,
    pub data_term: DataTerm,
    pub method: Method,
    pub eval: EvalSettings,
    /// Point cloud sampling step in pixels.
    pub stride: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scene: None,
            out: None,
            optimizer: OptimizerConfig::default(),
            weights: LossWeights::default(),
            data_term: DataTerm::L3d,
            method: Method::Full,
            eval: EvalSettings::default(),
            stride: 2,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|r| Error::Config(format!("{}: {r}", path.display())))
    }

    pub fn align_options(&self) -> AlignOptions {
        AlignOptions {
            weights: self.weights,
            data_term: self.data_term,
            deformation: self.method == Method::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if !self.weights.is_valid() {
            return Err(Error::Config(
                "loss weights must be finite and non-negative".into(),
            ));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be positive".into()));
        }
        if self.eval.alphas.is_empty() {
            return Err(Error::Config("at least one alpha is required".into()));
        }
        if let Some(a) = self.eval.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::Config(format!("alpha {a} is outside (0, 1)")));
        }
        if let (Some(s), Some(o)) = (&self.scene, &self.out) {
            if s == o {
                return Err(Error::Config(format!(
                    "scene and output are the same path {}",
                    s.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn nested_fields_and_enums() {
        let c = RunConfig::from_toml(
            "method = \"camera-only\"\ndata_term = \"l2d\"\n[optimizer]\nseed = 7\n\
             [optimizer.learning_rates]\nvertices = 0.5\n[eval]\nalphas = [0.01, 0.05]\n",
        )
        .unwrap();
        assert_eq!(c.method, Method::CameraOnly);
        assert_eq!(c.data_term, DataTerm::L2d);
        assert_eq!(c.optimizer.seed, 7);
        assert_eq!(c.optimizer.learning_rates.vertices, 0.5);
        assert_eq!(c.optimizer.learning_rates.rotation, 5e-3);
        assert_eq!(c.eval.alphas, [0.01, 0.05]);
        assert!(!c.align_options().deformation);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("strid = 3").is_err());
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let bad_alpha = RunConfig {
            eval: EvalSettings {
                alphas: vec![0.03, 1.0],
                ..EvalSettings::default()
            },
            ..RunConfig::default()
        };
        assert!(matches!(bad_alpha.validate(), Err(Error::Config(_))));
        let same = RunConfig {
            scene: Some("a".into()),
            out: Some("a".into()),
            ..RunConfig::default()
        };
        assert!(same.validate().is_err());
        let zero = RunConfig {
            stride: 0,
            ..RunConfig::default()
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig {
            method: Method::TraditionalBa,
            stride: 3,
            ..RunConfig::default()
        };
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }
}
