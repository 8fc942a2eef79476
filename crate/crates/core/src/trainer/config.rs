use serde::{Deserialize, Serialize};

use crate::error::{MqatError, Result};
use crate::planner::normalize_bits;
use crate::pose::{generate_dataset, ArchConfig, PoseSample};
use crate::quant::{PartitionStrategy, QuantKind};

use super::train::{derive_seed, name_tag};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub train: usize,
    pub val: usize,
    pub calibration: usize,
    pub noise_std: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            train: 2000,
            val: 2000,
            calibration: 256,
            noise_std: 1.0,
        }
    }
}

/// Everything a run needs besides the pretrained weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub budget: f64,
    pub quantizer: QuantKind,
    pub bits: Vec<u8>,
    pub epochs_per_module: usize,
    pub probe_epochs: usize,
    pub pretrain_epochs: usize,
    pub lr: f32,
    pub pretrain_lr: f32,
    pub momentum: f32,
    pub batch_size: usize,
    pub hutchinson_samples: usize,
    pub partition: PartitionStrategy,
    pub arch: ArchConfig,
    pub dataset: DatasetConfig,
}

impl RunConfig {
    /// Defaults for everything except the two required values.
    pub fn new(seed: u64, budget: f64) -> Self {
        Self {
            seed,
            budget,
            quantizer: QuantKind::Inq,
            bits: vec![2, 4, 8],
            epochs_per_module: 30,
            probe_epochs: 30,
            pretrain_epochs: 30,
            lr: 1e-2,
            pretrain_lr: 3e-3,
            momentum: 0.9,
            batch_size: 8,
            hutchinson_samples: 16,
            partition: PartitionStrategy::Magnitude,
            arch: ArchConfig::default(),
            dataset: DatasetConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget.is_finite() && self.budget >= 1.0) {
            return Err(MqatError::config(
                "budget",
                format!("{} is not a compression factor >= 1", self.budget),
            ));
        }
        normalize_bits(&self.bits).map_err(|e| MqatError::config("bits", e.to_string()))?;
        for (key, v) in [
            ("epochs_per_module", self.epochs_per_module),
            ("probe_epochs", self.probe_epochs),
            ("batch_size", self.batch_size),
            ("hutchinson_samples", self.hutchinson_samples),
            ("dataset.train", self.dataset.train),
            ("dataset.val", self.dataset.val),
            ("dataset.calibration", self.dataset.calibration),
        ] {
            if v == 0 {
                return Err(MqatError::config(key, "must be at least 1"));
            }
        }
        for (key, v) in [("lr", self.lr), ("pretrain_lr", self.pretrain_lr)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(MqatError::config(key, format!("{v} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(MqatError::config(
                "momentum",
                format!("{} outside [0, 1)", self.momentum),
            ));
        }
        if !(self.dataset.noise_std.is_finite() && self.dataset.noise_std >= 0.0) {
            return Err(MqatError::config(
                "dataset.noise_std",
                "must be finite and >= 0",
            ));
        }
        for (name, widths) in [
            ("backbone", &self.arch.backbone),
            ("aggregator", &self.arch.aggregator),
            ("head", &self.arch.head),
        ] {
            if widths.is_empty() || widths.contains(&0) {
                return Err(MqatError::config(
                    format!("{name}.widths"),
                    "needs at least one layer, all widths positive",
                ));
            }
        }
        Ok(())
    }

    /// Child seed for a named purpose.
    pub fn seed_for(&self, purpose: &str) -> u64 {
        derive_seed(self.seed, &[name_tag(purpose)])
    }
}

/// Train, validation and calibration splits, each from its own seed.
#[derive(Clone, Debug)]
pub struct Datasets {
    pub train: Vec<PoseSample>,
    pub val: Vec<PoseSample>,
    pub calibration: Vec<PoseSample>,
}

impl Datasets {
    pub fn generate(config: &RunConfig) -> Result<Self> {
        let d = &config.dataset;
        Ok(Self {
            train: generate_dataset(config.seed_for("train"), d.train, d.noise_std)?,
            val: generate_dataset(config.seed_for("val"), d.val, d.noise_std)?,
            calibration: generate_dataset(
                config.seed_for("calibration"),
                d.calibration,
                d.noise_std,
            )?,
        })
    }
}
