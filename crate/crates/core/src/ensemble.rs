//! Boosted ensembles of single-layer DoS models, one member per DoS order.
//!
//! Members are trained in order `0..=N`. The first member sees the training
//! set as is; later members see a weighted resample (seeded) of it, since
//! the SGD loop has no per-example weights. Member weights and example
//! re-weighting follow SAMME:
//!
//! * `err = Σ w_i [member misses i]` with `Σ w_i = 1`;
//! * `alpha = ln((1 - err) / err) + ln(k - 1)`;
//! * `w_i <- w_i * exp(alpha [miss_i])`, then renormalised.
//!
//! A member with `err >= (k - 1) / k` gets weight 0 and the example weights
//! reset to uniform. A member with `err == 0` gets `alpha = ln(1e6)`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cells::{Arch, Model};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::numerics::{Rng, Vector};
use crate::train::{checkpoint_from_str, checkpoint_to_string, ConfusionMatrix, ModelSpec, TrainConfig, Trainer};

/// Member weight used when a member makes no weighted error.
pub const ZERO_ERROR_ALPHA: f64 = 13.815_510_557_964_274; // ln(1e6)

pub const ENSEMBLE_FORMAT: &str = "d2rnn-ensemble";
pub const ENSEMBLE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostVariant {
    /// Multiclass AdaBoost with the `ln(k - 1)` term.
    #[default]
    Samme,
    /// AdaBoost.M1: no `ln(k - 1)` term, degenerate at `err >= 1/2`.
    M1,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub max_order: usize,
    pub state_units: usize,
    pub train: TrainConfig,
    pub variant: BoostVariant,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleMember {
    pub order: usize,
    pub weight: f64,
    /// Weighted training error at the time the member was added.
    pub weighted_error: f64,
    pub model: Model,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    pub classes: usize,
    pub members: Vec<EnsembleMember>,
}

/// Outcome of one boosting round.
#[derive(Clone, Debug, PartialEq)]
pub struct BoostRound {
    pub error: f64,
    pub alpha: f64,
    pub degenerate: bool,
    /// Example weights for the next round, summing to 1.
    pub weights: Vec<f64>,
}

pub fn boost_round(weights: &[f64], misses: &[bool], classes: usize, variant: BoostVariant) -> Result<BoostRound> {
    if weights.len() != misses.len() || weights.is_empty() {
        return Err(Error::shape(
            "boost_round",
            format!("{} weights", weights.len()),
            format!("{} outcomes", misses.len()),
        ));
    }
    if classes < 2 {
        return Err(Error::Invalid("boosting needs at least 2 classes".into()));
    }
    let total: f64 = weights.iter().sum();
    let error: f64 = weights
        .iter()
        .zip(misses)
        .filter(|(_, &m)| m)
        .map(|(w, _)| w)
        .sum::<f64>()
        / total;
    let k = classes as f64;
    let (limit, offset) = match variant {
        BoostVariant::Samme => ((k - 1.0) / k, (k - 1.0).ln()),
        BoostVariant::M1 => (0.5, 0.0),
    };
    let n = weights.len();
    if error >= limit {
        return Ok(BoostRound {
            error,
            alpha: 0.0,
            degenerate: true,
            weights: vec![1.0 / n as f64; n],
        });
    }
    let alpha = if error == 0.0 {
        ZERO_ERROR_ALPHA
    } else {
        ((1.0 - error) / error).ln() + offset
    };
    let boost = alpha.exp();
    let raw: Vec<f64> = weights
        .iter()
        .zip(misses)
        .map(|(&w, &m)| if m { w * boost } else { w })
        .collect();
    let sum: f64 = raw.iter().sum();
    Ok(BoostRound {
        error,
        alpha,
        degenerate: false,
        weights: raw.into_iter().map(|w| w / sum).collect(),
    })
}

/// `scores[c] = Σ_m weights[m] [predictions[m] == c]`; argmax with ties to
/// the lowest class.
pub fn weighted_vote(predictions: &[usize], weights: &[f64], classes: usize) -> (usize, Vector) {
    let mut scores = Vector::zeros(classes);
    for (&p, &w) in predictions.iter().zip(weights) {
        scores[p] += w;
    }
    (scores.argmax().unwrap_or(0), scores)
}

/// Index drawn with probability proportional to `cumulative` increments.
fn draw(cumulative: &[f64], rng: &mut Rng) -> usize {
    let total = *cumulative.last().expect("non-empty");
    let u = rng.next_f64() * total;
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

/// Trains members of orders `0..=max_order` and boosts them.
pub fn fit_ernn(dataset: &Dataset, config: &EnsembleConfig, exec: Execution) -> Result<EnsembleModel> {
    if dataset.is_empty() {
        return Err(Error::Empty("fit_ernn (dataset has no sequences)"));
    }
    let n = dataset.len();
    let classes = dataset.classes();
    let mut weights = vec![1.0 / n as f64; n];
    let mut resample_rng = Rng::new(config.train.seed ^ 0xB005_7ED0_5EED_0001);
    let mut members = Vec::with_capacity(config.max_order + 1);

    for order in 0..=config.max_order {
        let resampled;
        let train_set = if order == 0 {
            dataset
        } else {
            let mut cumulative = Vec::with_capacity(n);
            let mut acc = 0.0;
            for w in &weights {
                acc += w;
                cumulative.push(acc);
            }
            let idx: Vec<usize> = (0..n).map(|_| draw(&cumulative, &mut resample_rng)).collect();
            resampled = dataset.subset(&idx);
            &resampled
        };
        let spec = ModelSpec::new(Arch::Dos(order), config.state_units);
        let mut train_cfg = config.train.clone();
        train_cfg.seed = config.train.seed.wrapping_add(order as u64);
        let mut model = spec.build(dataset.feature_dim(), classes, train_cfg.seed)?;
        Trainer::new(train_cfg)?.fit(&mut model, train_set)?;

        let preds = exec::map(exec, &dataset.sequences, |s| model.predict(&s.frames))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let misses: Vec<bool> = preds
            .iter()
            .zip(&dataset.sequences)
            .map(|(&p, s)| p != s.label)
            .collect();
        let round = boost_round(&weights, &misses, classes, config.variant)?;
        weights = round.weights;
        members.push(EnsembleMember {
            order,
            weight: round.alpha,
            weighted_error: round.error,
            model,
        });
    }

    // Every member degenerate: keep the least-wrong one so the ensemble
    // still predicts like its best member.
    if members.iter().all(|m| m.weight == 0.0) {
        let best = members
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.weighted_error.total_cmp(&b.1.weighted_error))
            .map(|(i, _)| i)
            .expect("at least one member");
        members[best].weight = 1.0;
    }
    Ok(EnsembleModel { classes, members })
}

impl EnsembleModel {
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Invalid("ensemble has no members".into()));
        }
        if self.members.iter().any(|m| !(m.weight.is_finite() && m.weight >= 0.0)) {
            return Err(Error::Invalid("ensemble weights must be finite and non-negative".into()));
        }
        if !self.members.iter().any(|m| m.weight > 0.0) {
            return Err(Error::Invalid("ensemble needs a member with positive weight".into()));
        }
        for m in &self.members {
            m.model.validate()?;
            if m.model.config.output_classes != self.classes {
                return Err(Error::shape(
                    "ensemble",
                    format!("{} classes", self.classes),
                    format!("member with {} classes", m.model.config.output_classes),
                ));
            }
        }
        Ok(())
    }

    pub fn predict(&self, frames: &[Vector]) -> Result<(usize, Vector)> {
        predict_ensemble(self, frames, Execution::Sequential)
    }

    pub fn evaluate(&self, dataset: &Dataset, exec: Execution) -> Result<ConfusionMatrix> {
        let preds = exec::map(exec, &dataset.sequences, |s| self.predict(&s.frames))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let mut cm = ConfusionMatrix::new(self.classes);
        for ((p, _), s) in preds.iter().zip(&dataset.sequences) {
            cm.record(s.label, *p);
        }
        Ok(cm)
    }
}

pub fn predict_ensemble(e: &EnsembleModel, frames: &[Vector], exec: Execution) -> Result<(usize, Vector)> {
    let preds = exec::map(exec, &e.members, |m| m.model.predict(frames))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = e.members.iter().map(|m| m.weight).collect();
    Ok(weighted_vote(&preds, &weights, e.classes))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleDoc {
    format: String,
    version: u32,
    classes: usize,
    members: Vec<MemberDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemberDoc {
    order: usize,
    weight: f64,
    weighted_error: f64,
    checkpoint: serde_json::Value,
}

pub fn ensemble_to_string(e: &EnsembleModel) -> Result<String> {
    let members = e
        .members
        .iter()
        .map(|m| -> Result<MemberDoc> {
            let text = checkpoint_to_string(&m.model)?;
            Ok(MemberDoc {
                order: m.order,
                weight: m.weight,
                weighted_error: m.weighted_error,
                checkpoint: serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let doc = EnsembleDoc {
        format: ENSEMBLE_FORMAT.into(),
        version: ENSEMBLE_VERSION,
        classes: e.classes,
        members,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn ensemble_from_str(text: &str) -> Result<EnsembleModel> {
    let doc: EnsembleDoc =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("malformed ensemble: {e}")))?;
    if doc.format != ENSEMBLE_FORMAT || doc.version != ENSEMBLE_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported ensemble document {} v{} (expected {ENSEMBLE_FORMAT} v{ENSEMBLE_VERSION})",
            doc.format, doc.version
        )));
    }
    let members = doc
        .members
        .into_iter()
        .map(|m| -> Result<EnsembleMember> {
            Ok(EnsembleMember {
                order: m.order,
                weight: m.weight,
                weighted_error: m.weighted_error,
                model: checkpoint_from_str(&m.checkpoint.to_string())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let e = EnsembleModel {
        classes: doc.classes,
        members,
    };
    e.validate().map_err(|err| Error::Checkpoint(format!("inconsistent ensemble: {err}")))?;
    Ok(e)
}

pub fn ensemble_save(e: &EnsembleModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ensemble_to_string(e)?)?;
    Ok(())
}

pub fn ensemble_load(path: impl AsRef<Path>) -> Result<EnsembleModel> {
    ensemble_from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_alpha_is_ln_million() {
        assert!((ZERO_ERROR_ALPHA - 1e6f64.ln()).abs() < 1e-15);
        let r = boost_round(&[0.5, 0.5], &[false, false], 2, BoostVariant::Samme).unwrap();
        assert_eq!(r.alpha, ZERO_ERROR_ALPHA);
        assert_eq!(r.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn degenerate_member_resets_weights() {
        let r = boost_round(&[0.1, 0.2, 0.3, 0.4], &[true, true, false, true], 2, BoostVariant::Samme).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.alpha, 0.0);
        assert_eq!(r.weights, vec![0.25; 4]);
        // Six classes tolerate much larger error.
        let r = boost_round(&[0.25; 4], &[true, true, false, false], 6, BoostVariant::Samme).unwrap();
        assert!(!r.degenerate);
        assert!((r.alpha - 5f64.ln()).abs() < 1e-12);
        let m1 = boost_round(&[0.25; 4], &[true, true, false, false], 6, BoostVariant::M1).unwrap();
        assert!(m1.degenerate);
    }

    #[test]
    fn samme_equals_m1_for_two_classes() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let m = [true, false, false, false];
        assert_eq!(
            boost_round(&w, &m, 2, BoostVariant::Samme).unwrap(),
            boost_round(&w, &m, 2, BoostVariant::M1).unwrap()
        );
    }

    #[test]
    fn vote_breaks_ties_low() {
        let (c, s) = weighted_vote(&[1, 0], &[1.0, 1.0], 3);
        assert_eq!(c, 0);
        assert_eq!(s.as_slice(), &[1.0, 1.0, 0.0]);
        let (c, _) = weighted_vote(&[1, 0], &[2.0, 1.0], 2);
        assert_eq!(c, 1);
    }

    #[test]
    fn draw_follows_weights() {
        let mut rng = Rng::new(4);
        let cumulative = [0.0, 0.0, 1.0, 1.0];
        for _ in 0..100 {
            assert_eq!(draw(&cumulative, &mut rng), 2);
        }
    }
}
