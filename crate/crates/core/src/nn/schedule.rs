use serde::{Deserialize, Serialize};

use super::Activation;
use crate::{Error, Result};

/// Hyperparameters shared by the training loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub seed: u64,
    pub kernel_len: usize,
    pub layers: usize,
    pub channels: usize,
    pub activation: Activation,
    pub mse_weight: f64,
    pub sym_weight: f64,
    /// Fraction of samples held out for validation.
    pub val_fraction: f64,
    /// Weight of the KL term in the VAE objective.
    pub kl_weight: f64,
    pub lstm_hidden: usize,
    pub dropout: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 256,
            lr_start: 1e-3,
            lr_end: 1e-5,
            seed: 0,
            kernel_len: 75,
            layers: 5,
            channels: 2,
            activation: Activation::Tanh,
            mse_weight: 1.0,
            sym_weight: 1.0,
            val_fraction: 0.1,
            kl_weight: 1.0,
            lstm_hidden: 32,
            dropout: 0.2,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr_start >= self.lr_end && self.lr_end > 0.0) {
            return bad(format!(
                "need lr_start >= lr_end > 0, got {} and {}",
                self.lr_start, self.lr_end
            ));
        }
        if self.batch_size == 0 || self.kernel_len == 0 || self.layers == 0 || self.channels == 0 {
            return bad("batch_size, kernel_len, layers and channels must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!("val_fraction {} outside [0, 1)", self.val_fraction));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.mse_weight < 0.0 || self.sym_weight < 0.0 || self.kl_weight < 0.0 {
            return bad("loss weights must be >= 0".into());
        }
        if self.lstm_hidden == 0 {
            return bad("lstm_hidden must be >= 1".into());
        }
        Ok(())
    }
}

/// Geometric decay from `lr_start` at epoch 0 to `lr_end` at the last epoch.
pub fn lr_schedule(config: &TrainingConfig, epoch: usize) -> f64 {
    if config.epochs <= 1 {
        return config.lr_start;
    }
    let frac = epoch as f64 / (config.epochs - 1) as f64;
    config.lr_start * (config.lr_end / config.lr_start).powf(frac)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        let cfg = TrainingConfig::default();
        assert_eq!(lr_schedule(&cfg, 0), 1e-3);
        assert!((lr_schedule(&cfg, 499) - 1e-5).abs() < 1e-18);
        let mid = (lr_schedule(&cfg, 249) * lr_schedule(&cfg, 250)).sqrt();
        assert!((mid / 1e-4 - 1.0).abs() < 0.01);
        assert!((lr_schedule(&cfg, 250) / 1e-4 - 1.0).abs() < 0.01);
    }

    #[test]
    fn validation() {
        let mut cfg = TrainingConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.lr_end = 1e-2;
        assert!(cfg.validate().is_err());
        let parsed: std::result::Result<TrainingConfig, _> = toml::from_str("epochs = 3\nbogus = 1\n");
        assert!(parsed.is_err());
        let parsed: TrainingConfig = toml::from_str("epochs = 3\nactivation = \"identity\"\n").unwrap();
        assert_eq!(parsed.activation, Activation::Identity);
    }
}
