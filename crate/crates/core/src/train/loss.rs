use serde::{Deserialize, Serialize};

use crate::cells::Tape;
use crate::error::{Error, Result};
use crate::numerics::Vector;

/// What a sequence is scored against.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// One label, scored at the final frame.
    Sequence(usize),
    /// One label per frame, losses summed over frames.
    Frames(Vec<usize>),
}

/// `-ln p[c]` and its gradient with respect to the logits that produced `p`
/// through softmax, which is `p - onehot(c)`.
pub fn loss_frame(p: &Vector, c: usize) -> Result<(f64, Vector)> {
    if c >= p.len() {
        return Err(Error::Invalid(format!(
            "class {c} out of range for {} classes",
            p.len()
        )));
    }
    let loss = -p[c].ln();
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss for class {c} (p = {})", p[c])));
    }
    let mut grad = p.clone();
    grad[c] -= 1.0;
    Ok((loss, grad))
}

/// Sequence-level loss: [`loss_frame`] applied to the final frame's output.
pub fn loss_sequence(p: &Vector, c: usize) -> Result<(f64, Vector)> {
    loss_frame(p, c)
}

/// Total loss of a forward pass and the gradient at every frame's logits
/// (zero where a frame carries no loss).
pub fn objective(tape: &Tape, target: &Target) -> Result<(f64, Vec<Vector>)> {
    let classes = tape.sequence_probs().len();
    let mut grads = vec![Vector::zeros(classes); tape.len()];
    match target {
        Target::Sequence(c) => {
            let (loss, g) = loss_sequence(tape.sequence_probs(), *c)?;
            *grads.last_mut().expect("tape is never empty") = g;
            Ok((loss, grads))
        }
        Target::Frames(labels) => {
            if labels.len() != tape.len() {
                return Err(Error::shape(
                    "frame objective",
                    format!("{} frames", tape.len()),
                    format!("{} labels", labels.len()),
                ));
            }
            let mut total = 0.0;
            for (t, &c) in labels.iter().enumerate() {
                let (loss, g) = loss_frame(&tape.probs[t], c)?;
                total += loss;
                grads[t] = g;
            }
            Ok((total, grads))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::softmax;

    #[test]
    fn certain_prediction_costs_nothing() {
        let p = Vector::from(vec![0.0, 1.0, 0.0]);
        assert_eq!(loss_frame(&p, 1).unwrap().0, 0.0);
        assert_eq!(loss_sequence(&p, 1).unwrap().0, 0.0);
    }

    #[test]
    fn uniform_costs_log_k() {
        let p6 = Vector::filled(6, 1.0 / 6.0);
        assert!((loss_frame(&p6, 3).unwrap().0 - 6f64.ln()).abs() < 1e-15);
        assert!((loss_frame(&p6, 3).unwrap().0 - 1.7918).abs() < 1e-4);
        let p2 = Vector::filled(2, 0.5);
        assert!((loss_sequence(&p2, 0).unwrap().0 - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn random_logits_match_direct_evaluation() {
        // -ln softmax([0.3, -1.2, 2.1, 0.05])[2], evaluated with 50-digit arithmetic.
        let expected = 0.285_868_147_692_520_01;
        let p = softmax(&Vector::from(vec![0.3, -1.2, 2.1, 0.05])).unwrap();
        let (loss, grad) = loss_frame(&p, 2).unwrap();
        assert!((loss - expected).abs() < 1e-14, "{loss}");
        assert!(grad.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn bad_class_is_rejected() {
        assert!(loss_frame(&Vector::filled(2, 0.5), 2).is_err());
    }
}
