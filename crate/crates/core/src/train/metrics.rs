use serde::{Deserialize, Serialize};

use super::loss::{objective, Target};
use crate::cells::Model;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

/// Counts indexed `[true class][predicted class]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> usize {
        self.counts[truth][predicted]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.classes()).map(|c| self.counts[c][c]).sum()
    }

    /// Trace over total; 0 when empty.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean per-sequence loss.
    pub mean_loss: f64,
    pub confusion: ConfusionMatrix,
}

impl Metrics {
    pub fn accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }

    pub(crate) fn from_parts(classes: usize, per_item: &[(f64, usize, usize)]) -> Metrics {
        let mut confusion = ConfusionMatrix::new(classes);
        let mut total = 0.0;
        for &(loss, truth, pred) in per_item {
            total += loss;
            confusion.record(truth, pred);
        }
        Metrics {
            mean_loss: if per_item.is_empty() {
                0.0
            } else {
                total / per_item.len() as f64
            },
            confusion,
        }
    }
}

/// Sequence-level loss and argmax accuracy over a labelled dataset.
pub fn evaluate(model: &Model, dataset: &Dataset) -> Result<Metrics> {
    evaluate_with(model, dataset, Execution::default())
}

pub fn evaluate_with(model: &Model, dataset: &Dataset, exec: Execution) -> Result<Metrics> {
    let classes = model.config.output_classes;
    if dataset.classes() > classes {
        return Err(Error::Invalid(format!(
            "dataset has {} classes, model predicts {classes}",
            dataset.classes()
        )));
    }
    let per_item = exec::map(exec, &dataset.sequences, |s| -> Result<(f64, usize, usize)> {
        let tape = model.forward(&s.frames)?;
        let (loss, _) = objective(&tape, &Target::Sequence(s.label))?;
        Ok((loss, s.label, tape.prediction()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Metrics::from_parts(classes, &per_item))
}
