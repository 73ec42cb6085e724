use std::fmt;

use super::precise::{self, DdParams};
use super::{backward_full, Gradients, GRAD_CHECK_TOLERANCE};
use crate::cells::Model;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::numerics::{Dd, Vector};
use crate::train::{objective, Target};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_error).fold(0.0, f64::max)
    }

    /// Entry with the largest relative error.
    pub fn worst(&self) -> Option<&GradCheckEntry> {
        self.entries
            .iter()
            .fold(None, |best: Option<&GradCheckEntry>, e| match best {
                Some(b) if b.rel_error >= e.rel_error => Some(b),
                _ => Some(e),
            })
    }

    pub fn failures(&self) -> impl Iterator<Item = &GradCheckEntry> {
        self.entries.iter().filter(|e| e.rel_error >= self.tolerance)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "param\tindex\tanalytic\tnumeric\trel_error")?;
        for e in &self.entries {
            writeln!(
                f,
                "{}\t{}\t{:.12e}\t{:.12e}\t{:.3e}",
                e.param, e.index, e.analytic, e.numeric, e.rel_error
            )?;
        }
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "# parameters={} max_rel_error={:.3e} tolerance={:.1e} {verdict}",
            self.entries.len(),
            self.max_rel_error(),
            self.tolerance
        )?;
        if let Some(w) = self.worst() {
            write!(f, " worst={}[{}]", w.param, w.index)?;
        }
        Ok(())
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares [`backward_full`] against central finite differences on every
/// parameter.
///
/// The differenced loss is evaluated in double-double arithmetic with the
/// parameter offset by exactly `±FD_STEP`, so the numeric side carries no
/// `f64` cancellation error and tiny gradients are resolved too.
pub fn grad_check(model: &Model, frames: &[Vector], target: &Target) -> Result<GradCheckReport> {
    let tape = model.forward(frames)?;
    let (_, dlogits) = objective(&tape, target)?;
    let analytic = backward_full(model, &tape, &dlogits)?;
    grad_check_against(model, frames, target, &analytic, Execution::default())
}

/// Checks a supplied gradient against finite differences of the loss.
pub fn grad_check_against(
    model: &Model,
    frames: &[Vector],
    target: &Target,
    analytic: &Gradients,
    exec: Execution,
) -> Result<GradCheckReport> {
    let names: Vec<(String, usize)> = model
        .params
        .tensors()
        .iter()
        .map(|(n, t)| (n.clone(), t.len()))
        .collect();
    let analytic_tensors = analytic.params().tensors();
    if analytic_tensors.len() != names.len()
        || analytic_tensors
            .iter()
            .zip(&names)
            .any(|((an, at), (n, len))| an != n || at.len() != *len)
    {
        return Err(Error::shape(
            "grad_check",
            "model parameters",
            "gradient tensors",
        ));
    }

    // Validates shapes and labels, and rejects non-finite base losses.
    let tape = model.forward(frames)?;
    objective(&tape, target)?;

    let step = Dd::from(FD_STEP);
    let per_tensor = exec::map_range(exec, names.len(), |ti| -> Result<Vec<GradCheckEntry>> {
        let (name, len) = &names[ti];
        let mut probe = DdParams::new(model);
        let mut entries = Vec::with_capacity(*len);
        for index in 0..*len {
            let original = probe.get(ti, index);
            probe.set(ti, index, original + step);
            let plus = precise::loss(model, &probe, frames, target);
            probe.set(ti, index, original - step);
            let minus = precise::loss(model, &probe, frames, target);
            probe.set(ti, index, original);
            let numeric = ((plus - minus) / (step + step)).to_f64();
            let a = analytic_tensors[ti].1[index];
            if !numeric.is_finite() || !a.is_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient of {name}[{index}]: analytic {a}, numeric {numeric}"
                )));
            }
            entries.push(GradCheckEntry {
                param: name.clone(),
                index,
                analytic: a,
                numeric,
                rel_error: relative_error(a, numeric),
            });
        }
        Ok(entries)
    });

    let mut entries = Vec::new();
    for chunk in per_tensor {
        entries.extend(chunk?);
    }
    Ok(GradCheckReport {
        entries,
        tolerance: GRAD_CHECK_TOLERANCE,
    })
}
