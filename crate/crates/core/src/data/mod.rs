//! Labelled sequence datasets: synthetic generation, JSONL files,
//! cross-validation splits and PCA preprocessing.

mod jsonl;
mod preprocess;
mod split;
mod synth;

use serde::{Deserialize, Serialize};

pub use jsonl::{load_jsonl, read_jsonl, save_jsonl, write_jsonl};
pub use preprocess::{apply_preprocess, fit_preprocess};
pub use split::{make_splits, Split, SplitPlan};
pub use synth::{gen_synthetic, SynthSpec, SynthTask};

use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::train::{LossMode, Target};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sequence {
    pub id: String,
    pub label: usize,
    pub frames: Vec<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_labels: Option<Vec<usize>>,
    /// Source grouping for grouped folds (e.g. clips cut from one recording).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl Sequence {
    pub fn new(id: impl Into<String>, label: usize, frames: Vec<Vector>) -> Self {
        Sequence {
            id: id.into(),
            label,
            frames,
            frame_labels: None,
            group: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.frames.first().map_or(0, Vector::len)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Checks the frame invariants; `Err` carries a short description.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.frames.is_empty() {
            return Err(format!("sequence '{}' has no frames", self.id));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(format!("sequence '{}' has empty frames", self.id));
        }
        for (t, f) in self.frames.iter().enumerate() {
            if f.len() != dim {
                return Err(format!(
                    "sequence '{}' frame {t} has dim {} (frame 0 has {dim})",
                    self.id,
                    f.len()
                ));
            }
            if !f.is_finite() {
                return Err(format!("sequence '{}' frame {t} is not finite", self.id));
            }
        }
        if let Some(fl) = &self.frame_labels {
            if fl.len() != self.frames.len() {
                return Err(format!(
                    "sequence '{}' has {} frame labels for {} frames",
                    self.id,
                    fl.len(),
                    self.frames.len()
                ));
            }
        }
        Ok(())
    }

    /// Training target for `mode`; frame mode falls back to repeating the
    /// sequence label when no frame labels are present.
    pub fn target(&self, mode: LossMode) -> Target {
        match mode {
            LossMode::Sequence => Target::Sequence(self.label),
            LossMode::Frame => Target::Frames(
                self.frame_labels
                    .clone()
                    .unwrap_or_else(|| vec![self.label; self.frames.len()]),
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub sequences: Vec<Sequence>,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(class_names: Vec<String>, sequences: Vec<Sequence>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::Invalid("dataset has no classes".into()));
        }
        let feature_dim = sequences.first().map_or(0, Sequence::dim);
        for s in &sequences {
            s.validate().map_err(Error::Invalid)?;
            if s.dim() != feature_dim {
                return Err(Error::shape(
                    "dataset",
                    format!("feature dim {feature_dim}"),
                    format!("sequence '{}' dim {}", s.id, s.dim()),
                ));
            }
            check_labels(s, class_names.len()).map_err(Error::Invalid)?;
        }
        Ok(Dataset {
            class_names,
            sequences,
            feature_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn labels(&self) -> Vec<usize> {
        self.sequences.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes()];
        for s in &self.sequences {
            counts[s.label] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            class_names: self.class_names.clone(),
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            feature_dim: self.feature_dim,
        }
    }
}

pub(crate) fn check_labels(s: &Sequence, classes: usize) -> std::result::Result<(), String> {
    if s.label >= classes {
        return Err(format!(
            "sequence '{}' label {} out of range for {classes} classes",
            s.id, s.label
        ));
    }
    if let Some(fl) = &s.frame_labels {
        if let Some(bad) = fl.iter().find(|&&c| c >= classes) {
            return Err(format!(
                "sequence '{}' frame label {bad} out of range for {classes} classes",
                s.id
            ));
        }
    }
    Ok(())
}
