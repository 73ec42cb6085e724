//! Losses, SGD training, metrics, checkpoints and cross-validated runs.

mod checkpoint;
mod experiment;
mod loss;
mod metrics;
mod sgd;

use serde::{Deserialize, Serialize};

pub use checkpoint::{
    checkpoint_from_str, checkpoint_load, checkpoint_save, checkpoint_to_string, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
};
pub use experiment::{cross_validate, CvReport, FoldResult, ModelSpec, Preprocess};
pub use loss::{loss_frame, loss_sequence, objective, Target};
pub use metrics::{evaluate, evaluate_with, ConfusionMatrix, Metrics};
pub use sgd::{sgd_epoch, Trainer};

use crate::backprop::Truncation;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Loss on the final frame against the sequence label.
    #[default]
    Sequence,
    /// Summed per-frame losses.
    Frame,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub mode: LossMode,
    pub truncation: Truncation,
    pub seed: u64,
    /// Rescale each per-sequence gradient to at most this norm.
    pub clip_norm: Option<f64>,
    pub shuffle: bool,
    /// Heavy-ball coefficient; 0 is plain SGD.
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 50,
            mode: LossMode::Sequence,
            truncation: Truncation::Truncated,
            seed: 0,
            clip_norm: None,
            shuffle: true,
            momentum: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Invalid(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be at least 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Invalid(format!("clip_norm must be positive, got {c}")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Invalid(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}
