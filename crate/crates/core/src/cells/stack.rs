use serde::{Deserialize, Serialize};

use super::config::StackConfig;
use super::params::Params;
use super::step::{dos, step, LayerState, StepRecord};
use crate::error::{Error, Result};
use crate::numerics::{softmax, Rng, Vector};

/// A stack of recurrent layers plus the output projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: StackConfig,
    /// Seed the parameters were initialised from.
    pub seed: u64,
    pub params: Params,
}

impl Model {
    pub fn new(config: StackConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(seed);
        let params = Params::random(&config, &mut rng);
        Ok(Model {
            config,
            seed,
            params,
        })
    }

    pub fn zeros(config: StackConfig) -> Result<Self> {
        config.validate()?;
        let params = Params::zeros(&config);
        Ok(Model {
            config,
            seed: 0,
            params,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.params.check_against(&self.config)
    }

    pub fn forward(&self, frames: &[Vector]) -> Result<Tape> {
        stack_forward(self, frames)
    }

    /// Class probabilities at the final frame.
    pub fn sequence_probs(&self, frames: &[Vector]) -> Result<Vector> {
        Ok(self.forward(frames)?.sequence_probs().clone())
    }

    pub fn predict(&self, frames: &[Vector]) -> Result<usize> {
        Ok(self.forward(frames)?.prediction())
    }
}

/// Everything the forward pass computed, kept for backpropagation.
#[derive(Clone, Debug, PartialEq)]
pub struct Tape {
    /// `layers[k][t]`.
    pub layers: Vec<Vec<StepRecord>>,
    /// `y_t = tanh(W_yh h_t + b_y)` per frame.
    pub logits: Vec<Vector>,
    /// `softmax(y_t)` per frame.
    pub probs: Vec<Vector>,
}

impl Tape {
    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn sequence_logits(&self) -> &Vector {
        self.logits.last().expect("tape is never empty")
    }

    pub fn sequence_probs(&self) -> &Vector {
        self.probs.last().expect("tape is never empty")
    }

    /// Argmax of the final frame's probabilities.
    pub fn prediction(&self) -> usize {
        self.sequence_probs().argmax().unwrap_or(0)
    }

    pub fn states(&self, layer: usize) -> Vec<&Vector> {
        self.layers[layer].iter().map(StepRecord::s).collect()
    }

    pub fn hidden(&self, layer: usize) -> Vec<&Vector> {
        self.layers[layer].iter().map(StepRecord::h).collect()
    }
}

/// Runs every frame through the stack; layer `k` reads layer `k - 1`'s
/// hidden states. The final frame's output doubles as the sequence output.
pub fn stack_forward(model: &Model, frames: &[Vector]) -> Result<Tape> {
    if frames.is_empty() {
        return Err(Error::Empty("stack_forward (sequence has no frames)"));
    }
    let cfg = &model.config;
    if model.params.layers.len() != cfg.layers.len() {
        return Err(Error::shape(
            "stack_forward",
            format!("{} parameter layers", model.params.layers.len()),
            format!("{} configured layers", cfg.layers.len()),
        ));
    }
    let mut states: Vec<LayerState> = cfg
        .layers
        .iter()
        .map(|l| LayerState::new(l.state_units, l.kind.max_order()))
        .collect();
    let mut layers: Vec<Vec<StepRecord>> = vec![Vec::with_capacity(frames.len()); cfg.layers.len()];
    let mut logits = Vec::with_capacity(frames.len());
    let mut probs = Vec::with_capacity(frames.len());

    let out = &model.params.output;
    for (t, frame) in frames.iter().enumerate() {
        if frame.len() != cfg.input_units {
            return Err(Error::shape(
                "stack_forward",
                format!("input units {}", cfg.input_units),
                format!("frame {t} len {}", frame.len()),
            ));
        }
        let mut input = frame.clone();
        for (k, spec) in cfg.layers.iter().enumerate() {
            let (next, record) = step(spec.kind, &model.params.layers[k], &states[k], &input)?;
            input = record.h().clone();
            states[k] = next;
            layers[k].push(record);
        }
        let mut y = out.w_yh.matvec(&input)?;
        for (a, b) in y.as_mut_slice().iter_mut().zip(out.b_y.iter()) {
            *a = (*a + b).tanh();
        }
        probs.push(softmax(&y)?);
        logits.push(y);
    }
    Ok(Tape {
        layers,
        logits,
        probs,
    })
}

/// Per-frame L2 norms of the DoS orders `0..=n` modelled by `layer`
/// (order 0 only for layers without DoS gating). Row `t` holds frame `t`.
pub fn dos_energy(model: &Model, frames: &[Vector], layer: usize) -> Result<Vec<Vec<f64>>> {
    let spec = model.config.layers.get(layer).ok_or_else(|| {
        Error::Invalid(format!(
            "layer {layer} out of range (model has {})",
            model.config.layers.len()
        ))
    })?;
    let max_order = spec.kind.max_order();
    let tape = stack_forward(model, frames)?;
    let states = tape.states(layer);
    Ok((0..states.len())
        .map(|t| {
            let lagged: Vec<&Vector> = states[..t].iter().rev().copied().collect();
            (0..=max_order)
                .map(|n| dos(n, states[t], &lagged).norm())
                .collect()
        })
        .collect())
}
