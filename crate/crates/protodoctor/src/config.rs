//! Resolved run configuration: one TOML file covering data generation,
//! model shape, training, and evaluation, with a stable hash so every
//! artifact can name the exact configuration that produced it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ehr::SyntheticSpec;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Schema file; the embedded default when absent.
    pub schema: Option<PathBuf>,
    pub synthetic: SyntheticSpec,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub split_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            schema: None,
            synthetic: SyntheticSpec::default(),
            train_fraction: 0.7,
            val_fraction: 0.15,
            test_fraction: 0.15,
            split_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// One training run per seed when evaluating variant grids.
    pub seeds: Vec<u64>,
    /// Run the full ablation grid instead of only the configured model.
    pub all_variants: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { seeds: vec![0, 1, 2], all_variants: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl AppConfig {
    /// Read a config file, or the built-in defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<AppConfig> {
        let cfg = match path {
            None => AppConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.data.synthetic.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        let f = (
            self.data.train_fraction,
            self.data.val_fraction,
            self.data.test_fraction,
        );
        if (f.0 + f.1 + f.2 - 1.0).abs() > 1e-9 || f.0 <= 0.0 || f.1 <= 0.0 || f.2 <= 0.0 {
            return Err(Error::Config(format!(
                "split fractions must be positive and sum to 1, got {f:?}"
            )));
        }
        if self.eval.seeds.is_empty() {
            return Err(Error::Config("eval.seeds must list at least one seed".into()));
        }
        Ok(())
    }

    /// Use one seed everywhere randomness enters: generation, splitting,
    /// initialization, and batch order.
    pub fn override_seed(&mut self, seed: u64) {
        self.data.synthetic.seed = seed;
        self.data.split_seed = seed;
        self.model.init_seed = seed;
        self.train.seed = seed;
    }

    /// Hex SHA-256 of the canonical (JSON) serialization; identical configs
    /// hash identically regardless of where they were loaded from.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    /// Write the fully resolved configuration (after flag overrides) so a
    /// run can be reproduced from its output directory alone.
    pub fn save_resolved(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("config serialization failed: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_schema(&self) -> Result<crate::schema::Schema> {
        match &self.data.schema {
            None => Ok(crate::schema::Schema::default_schema()),
            Some(p) => crate::schema::Schema::load(p),
        }
    }

    pub fn split_fractions(&self) -> (f64, f64, f64) {
        (
            self.data.train_fraction,
            self.data.val_fraction,
            self.data.test_fraction,
        )
    }
}
