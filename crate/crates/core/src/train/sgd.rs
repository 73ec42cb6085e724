use super::loss::objective;
use super::metrics::Metrics;
use super::TrainConfig;
use crate::backprop::backward;
use crate::cells::{Model, Params};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Per-sequence SGD with optional heavy-ball momentum.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    velocity: Option<Params>,
    epochs_done: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Trainer {
            config,
            velocity: None,
            epochs_done: 0,
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    /// Runs `config.epochs` epochs and returns one [`Metrics`] per epoch.
    pub fn fit(&mut self, model: &mut Model, dataset: &Dataset) -> Result<Vec<Metrics>> {
        (0..self.config.epochs)
            .map(|_| self.epoch(model, dataset))
            .collect()
    }

    /// One pass over `dataset`. Metrics use each sequence's loss and
    /// prediction just before its own update.
    pub fn epoch(&mut self, model: &mut Model, dataset: &Dataset) -> Result<Metrics> {
        if dataset.is_empty() {
            return Err(Error::Empty("sgd_epoch (dataset has no sequences)"));
        }
        if dataset.feature_dim() != model.config.input_units {
            return Err(Error::shape(
                "sgd_epoch",
                format!("model input units {}", model.config.input_units),
                format!("dataset feature dim {}", dataset.feature_dim()),
            ));
        }
        if dataset.classes() > model.config.output_classes {
            return Err(Error::Invalid(format!(
                "dataset has {} classes, model predicts {}",
                dataset.classes(),
                model.config.output_classes
            )));
        }
        let cfg = &self.config;
        let epoch = self.epochs_done;
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        if cfg.shuffle {
            Rng::new(epoch_seed(cfg.seed, epoch)).shuffle(&mut order);
        }

        let mut items = Vec::with_capacity(order.len());
        for &idx in &order {
            let seq = &dataset.sequences[idx];
            let tape = model.forward(&seq.frames)?;
            let (loss, dlogits) = objective(&tape, &seq.target(cfg.mode))?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss {loss} on sequence '{}' in epoch {epoch}",
                    seq.id
                )));
            }
            items.push((loss, seq.label, tape.prediction()));

            let mut grads = backward(model, &tape, &dlogits, cfg.truncation)?;
            if let Some(c) = cfg.clip_norm {
                grads.clip_norm(c);
            }
            if cfg.momentum > 0.0 {
                let v = self.velocity.get_or_insert_with(|| model.params.zeros_like());
                v.scale(cfg.momentum);
                v.axpy(1.0, grads.params())?;
                model.params.axpy(-cfg.learning_rate, v)?;
            } else {
                model.params.axpy(-cfg.learning_rate, grads.params())?;
            }
            if !model.params.is_finite() {
                return Err(Error::NonFinite(format!(
                    "parameters diverged after sequence '{}' in epoch {epoch}",
                    seq.id
                )));
            }
        }
        self.epochs_done += 1;
        Ok(Metrics::from_parts(model.config.output_classes, &items))
    }
}

/// Shuffle seed of a given epoch (SplitMix64 finaliser over seed and epoch).
fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    let mut z = seed ^ (epoch as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One plain-SGD epoch; `epoch` selects the shuffle order.
pub fn sgd_epoch(model: &mut Model, dataset: &Dataset, config: &TrainConfig, epoch: usize) -> Result<Metrics> {
    let mut cfg = config.clone();
    cfg.momentum = 0.0;
    let mut trainer = Trainer::new(cfg)?;
    trainer.epochs_done = epoch;
    trainer.epoch(model, dataset)
}
