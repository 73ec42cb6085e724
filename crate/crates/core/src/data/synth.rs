use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Dataset, Sequence};
use crate::error::{Error, Result};
use crate::numerics::{Rng, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthTask {
    /// Classes differ in drift rate only.
    Velocity,
    /// Classes share the drift and differ in constant curvature.
    Acceleration,
    /// Class index encodes a (rate, curvature) pair.
    Mixed,
}

impl fmt::Display for SynthTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthTask::Velocity => "velocity",
            SynthTask::Acceleration => "acceleration",
            SynthTask::Mixed => "mixed",
        })
    }
}

impl FromStr for SynthTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "velocity" => Ok(SynthTask::Velocity),
            "acceleration" => Ok(SynthTask::Acceleration),
            "mixed" => Ok(SynthTask::Mixed),
            _ => Err(Error::Invalid(format!(
                "unknown task '{s}' (expected velocity, acceleration or mixed)"
            ))),
        }
    }
}

/// Parameters of the synthetic trajectory generator.
///
/// Each sequence follows a latent trajectory in (at most) two dimensions,
/// `z_t = z_0 + rate * t * e_1 + curvature * t^2 / 2 * e_2`, with a random
/// start `z_0 ~ N(0, offset_scale^2 I)`. Frames are `x_t = P z_t + noise`
/// where `P` has orthonormal columns scaled by `gain`, so per-step delta
/// norms in frame space equal those of the latent path times `gain`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub task: SynthTask,
    pub classes: usize,
    pub count: usize,
    pub len: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Class `c` drifts at `rate_step * (c + 1)` (velocity task) and all
    /// classes drift at `rate_step` (acceleration task).
    pub rate_step: f64,
    /// Class `c` curves at `curvature_step * (c - (classes - 1) / 2)`.
    pub curvature_step: f64,
    pub offset_scale: f64,
    pub gain: f64,
}

impl SynthSpec {
    pub fn new(task: SynthTask, classes: usize, count: usize, len: usize, dim: usize, noise_sigma: f64, seed: u64) -> Self {
        SynthSpec {
            task,
            classes,
            count,
            len,
            dim,
            noise_sigma,
            seed,
            rate_step: 0.1,
            curvature_step: 0.02,
            offset_scale: 1.0,
            gain: 1.0,
        }
    }

    /// `(rate, curvature)` of class `c`.
    pub fn class_dynamics(&self, c: usize) -> (f64, f64) {
        let centered = |i: usize, n: usize| i as f64 - (n as f64 - 1.0) / 2.0;
        match self.task {
            SynthTask::Velocity => (self.rate_step * (c + 1) as f64, 0.0),
            SynthTask::Acceleration => (self.rate_step, self.curvature_step * centered(c, self.classes)),
            SynthTask::Mixed => {
                let curv_levels = self.classes.div_ceil(2);
                (
                    self.rate_step * (1 + c % 2) as f64,
                    self.curvature_step * centered(c / 2, curv_levels),
                )
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Invalid(format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.count == 0 {
            return Err(Error::Invalid("sequence count must be positive".into()));
        }
        if self.len < 2 {
            return Err(Error::Invalid(format!("sequence length {} < 2", self.len)));
        }
        if self.dim == 0 {
            return Err(Error::Invalid("frame dim must be positive".into()));
        }
        for (name, v) in [
            ("noise_sigma", self.noise_sigma),
            ("offset_scale", self.offset_scale),
            ("gain", self.gain),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Invalid(format!("{name} must be finite and non-negative")));
            }
        }
        if !self.rate_step.is_finite() || !self.curvature_step.is_finite() {
            return Err(Error::Invalid("rate/curvature steps must be finite".into()));
        }
        Ok(())
    }
}

/// Columns of a `dim x q` matrix with orthonormal columns (Gram–Schmidt on
/// Gaussian draws).
fn orthonormal_columns(dim: usize, q: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(q);
    while cols.len() < q {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        for c in &cols {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            cols.push(v);
        }
    }
    cols
}

/// Generates a class-balanced dataset (labels assigned round-robin).
pub fn gen_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let q = spec.dim.min(2);
    let projection = orthonormal_columns(spec.dim, q, &mut rng);
    let curve_axis = q - 1;

    let mut sequences = Vec::with_capacity(spec.count);
    for n in 0..spec.count {
        let label = n % spec.classes;
        let (rate, curvature) = spec.class_dynamics(label);
        let z0: Vec<f64> = (0..q).map(|_| spec.offset_scale * rng.normal()).collect();
        let frames = (0..spec.len)
            .map(|t| {
                let t = t as f64;
                let mut z = z0.clone();
                z[0] += rate * t;
                z[curve_axis] += 0.5 * curvature * t * t;
                (0..spec.dim)
                    .map(|d| {
                        let clean: f64 = (0..q).map(|j| projection[j][d] * z[j]).sum();
                        spec.gain * clean + spec.noise_sigma * rng.normal()
                    })
                    .collect::<Vector>()
            })
            .collect();
        sequences.push(Sequence::new(format!("{}-{n:05}", spec.task), label, frames));
    }
    let class_names = (0..spec.classes).map(|c| format!("class{c}")).collect();
    Dataset::new(class_names, sequences)
}
