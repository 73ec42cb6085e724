//! Architecture ordering on the acceleration task: a 3-layer d2RNN against
//! a 3-layer stacked LSTM and a single LSTM at matched state width.

use std::path::{Path, PathBuf};

use d2rnn::cells::Arch;
use d2rnn::data::{gen_synthetic, SplitPlan, SynthSpec, SynthTask};
use d2rnn::exec::{self, Execution};
use d2rnn::train::{cross_validate, ModelSpec, Preprocess, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Subject first, then the baselines.
pub const ARCHS: [&str; 3] = ["d2rnn:3", "stacked:3", "lstm"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendSetup {
    pub classes: usize,
    pub count: usize,
    pub len: usize,
    pub dim: usize,
    pub noise: f64,
    pub curvature_step: f64,
    pub state_units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub folds: usize,
    pub seeds: Vec<u64>,
}

impl Default for TrendSetup {
    fn default() -> Self {
        TrendSetup {
            classes: 3,
            count: 200,
            len: 20,
            dim: 16,
            noise: 0.1,
            curvature_step: 0.01,
            state_units: 16,
            learning_rate: 1e-2,
            epochs: 30,
            folds: 5,
            seeds: (0..5).collect(),
        }
    }
}

/// k-fold mean accuracy of each of [`ARCHS`] for one seed, which fixes the
/// data, the split and the initial weights.
pub fn seed_accuracies(setup: &TrendSetup, seed: u64, exec: Execution) -> Result<[f64; 3], Failure> {
    let mut spec = SynthSpec::new(
        SynthTask::Acceleration,
        setup.classes,
        setup.count,
        setup.len,
        setup.dim,
        setup.noise,
        seed,
    );
    spec.curvature_step = setup.curvature_step;
    let data = gen_synthetic(&spec)?;
    let plan = SplitPlan::KFold {
        k: setup.folds,
        seed,
        by_group: false,
    };
    let config = TrainConfig {
        learning_rate: setup.learning_rate,
        epochs: setup.epochs,
        seed,
        ..TrainConfig::default()
    };
    let mut out = [0.0; 3];
    for (slot, arch) in out.iter_mut().zip(ARCHS) {
        let arch: Arch = arch.parse()?;
        let report = cross_validate(
            &data,
            &ModelSpec::new(arch, setup.state_units),
            &plan,
            &config,
            Preprocess::None,
            exec,
        )?;
        *slot = report.mean_accuracy();
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRow {
    pub seed: u64,
    /// Accuracies in [`ARCHS`] order.
    pub accuracy: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub baseline: String,
    pub mean_gap: f64,
    pub std_error: f64,
    /// `max(0, mean_gap - 2 * std_error)`.
    pub margin: f64,
}

impl Comparison {
    pub fn holds(&self) -> bool {
        self.mean_gap >= self.margin
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendRecord {
    pub setup: TrendSetup,
    pub runs: Vec<SeedRow>,
    pub comparisons: Vec<Comparison>,
}

/// Mean gap of the subject over each baseline, its standard error across
/// seeds, and the margin the gap clears with two standard errors to spare.
pub fn compare(runs: &[SeedRow]) -> Vec<Comparison> {
    let n = runs.len() as f64;
    (1..ARCHS.len())
        .map(|b| {
            let gaps: Vec<f64> = runs.iter().map(|r| r.accuracy[0] - r.accuracy[b]).collect();
            let mean = gaps.iter().sum::<f64>() / n;
            let var = if runs.len() > 1 {
                gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let std_error = (var / n).sqrt();
            Comparison {
                baseline: ARCHS[b].to_string(),
                mean_gap: mean,
                std_error,
                margin: (mean - 2.0 * std_error).max(0.0),
            }
        })
        .collect()
}

/// Runs every seed of `setup`; seeds run concurrently under
/// [`Execution::Parallel`].
pub fn run(setup: &TrendSetup, exec: Execution) -> Result<TrendRecord, Failure> {
    let runs = exec::map(exec, &setup.seeds, |&seed| {
        seed_accuracies(setup, seed, Execution::Sequential).map(|accuracy| SeedRow { seed, accuracy })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(TrendRecord {
        setup: setup.clone(),
        comparisons: compare(&runs),
        runs,
    })
}

/// Checked-in location of the recorded margins.
pub fn record_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/ordering_margins.toml")
}

pub fn save_record(record: &TrendRecord, path: &Path) -> Result<(), Failure> {
    let text = toml::to_string(record).map_err(|e| Failure::Data(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Failure::io(path, e))
}

pub fn load_record(path: &Path) -> Result<TrendRecord, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    toml::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}
