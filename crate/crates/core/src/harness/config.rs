use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{Activation, DEFAULT_FEATURE_DIM};
use crate::fusion::LOSS_CLAMP;
use crate::{Error, Result};

/// Optimizer and architecture settings. Everything here is numeric; frames
/// and data come from the benchmark spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub pretrain_lr: f64,
    pub finetune_lr: f64,
    pub batch: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub loss_clamp: f64,
    /// Hidden layer widths of every feature extractor.
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub output_activation: Activation,
    /// Prototypes per source DS layer. Sources not listed get
    /// `prototypes_per_class` for each class other than anything-else.
    pub prototypes: BTreeMap<String, usize>,
    pub prototypes_per_class: usize,
    /// Prototypes of the joint DS layer used by EFC; by default
    /// `prototypes_per_class` per common-frame class.
    pub joint_prototypes: Option<usize>,
    /// Record ids whose masses are written to the inspection file.
    pub inspect: Vec<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            pretrain_lr: 0.02,
            finetune_lr: 0.005,
            batch: 32,
            pretrain_epochs: 200,
            finetune_epochs: 50,
            loss_clamp: LOSS_CLAMP,
            hidden: vec![16],
            feature_dim: DEFAULT_FEATURE_DIM,
            output_activation: Activation::Identity,
            prototypes: BTreeMap::new(),
            prototypes_per_class: 3,
            joint_prototypes: None,
            inspect: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.pretrain_lr >= 0.0 && self.pretrain_lr.is_finite())
            || !(self.finetune_lr >= 0.0 && self.finetune_lr.is_finite())
        {
            return bad("learning rates must be finite and non-negative");
        }
        if self.batch == 0 {
            return bad("batch size must be positive");
        }
        if self.feature_dim == 0 || self.hidden.contains(&0) {
            return bad("layer widths must be positive");
        }
        if self.prototypes_per_class == 0 || self.joint_prototypes == Some(0) || self.prototypes.values().any(|&n| n == 0) {
            return bad("prototype counts must be positive");
        }
        if !(self.loss_clamp > 0.0 && self.loss_clamp < 1.0) {
            return bad("loss clamp must lie in (0, 1)");
        }
        Ok(())
    }

    /// Prototype count for a source layer with `classes` singleton classes.
    pub fn prototypes_for(&self, source: &str, classes: usize) -> usize {
        self.prototypes
            .get(source)
            .copied()
            .unwrap_or(self.prototypes_per_class * classes)
    }

    pub fn joint_prototypes_for(&self, classes: usize) -> usize {
        self.joint_prototypes.unwrap_or(self.prototypes_per_class * classes)
    }
}

/// Hex SHA-256 of the JSON serialization of each part, in order.
pub fn config_hash<T: Serialize>(parts: &[&T]) -> Result<String> {
    let mut h = Sha256::new();
    for p in parts {
        h.update(serde_json::to_vec(p)?);
        h.update([0u8]);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&s).unwrap(), c);
        let partial: TrainConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(partial.seed, 3);
        assert_eq!(partial.batch, 32);
    }

    #[test]
    fn rejects_bad_values() {
        let c = TrainConfig {
            batch: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            pretrain_lr: f64::NAN,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_changes_with_config() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_eq!(config_hash(&[&a]).unwrap(), config_hash(&[&a.clone()]).unwrap());
        assert_ne!(config_hash(&[&a]).unwrap(), config_hash(&[&b]).unwrap());
        assert_eq!(config_hash(&[&a]).unwrap().len(), 64);
    }
}
