use std::fs;
use std::path::{Path, PathBuf};

use mixbag_core::{BagGenConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Synthetic Gaussian blobs, regenerated per seed.
    Blobs {
        num_classes: usize,
        per_class: usize,
        dim: usize,
        spread: f64,
    },
    Csv {
        path: PathBuf,
        num_classes: usize,
        #[serde(default)]
        has_header: bool,
    },
}

impl DatasetSource {
    pub fn num_classes(&self) -> usize {
        match self {
            DatasetSource::Blobs { num_classes, .. } | DatasetSource::Csv { num_classes, .. } => *num_classes,
        }
    }
}

fn default_num_seeds() -> usize {
    5
}

fn default_fraction() -> f64 {
    0.2
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_name() -> String {
    "run".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Prefix for output files.
    #[serde(default = "default_name")]
    pub name: String,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub bags: BagGenConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Independent repetitions (data, bag and split seeds differ per repetition).
    #[serde(default = "default_num_seeds")]
    pub num_seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Fraction of bags held out for validation (early stopping).
    #[serde(default = "default_fraction")]
    pub val_fraction: f64,
    /// Fraction of labeled instances held out for instance-level testing.
    #[serde(default = "default_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: mixbag_core::Error| CliError::Config(format!("at `{name}`: {e}"));
        if self.num_seeds < 1 {
            return Err(CliError::Config("at `num_seeds`: must be >= 1".into()));
        }
        for (name, v) in [("val_fraction", self.val_fraction), ("test_fraction", self.test_fraction)] {
            if !(0.0..1.0).contains(&v) {
                return Err(CliError::Config(format!("at `{name}`: must be in [0, 1)")));
            }
        }
        if let DatasetSource::Blobs { num_classes, per_class, dim, spread } = &self.dataset {
            if *num_classes < 2 || *per_class < 1 || *dim < 1 || !(*spread > 0.0) {
                return Err(CliError::Config("at `dataset.blobs`: invalid blob parameters".into()));
            }
        }
        if self.dataset.num_classes() < 2 {
            return Err(CliError::Config("at `dataset`: need at least two classes".into()));
        }
        self.bags.validate().map_err(|e| field("bags", e))?;
        self.train.validate().map_err(|e| field("train", e))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
