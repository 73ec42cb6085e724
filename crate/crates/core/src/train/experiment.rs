use serde::{Deserialize, Serialize};

use super::metrics::{evaluate_with, Metrics};
use super::sgd::Trainer;
use super::TrainConfig;
use crate::cells::{Arch, Model, StackConfig};
use crate::data::{apply_preprocess, fit_preprocess, make_splits, Dataset, SplitPlan};
use crate::error::Result;
use crate::exec::{self, Execution};
use crate::numerics::PcaTransform;

/// Architecture family plus layer width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    pub arch: Arch,
    pub state_units: usize,
    pub tie_gate_hidden_weights: bool,
}

impl ModelSpec {
    pub fn new(arch: Arch, state_units: usize) -> Self {
        ModelSpec {
            arch,
            state_units,
            tie_gate_hidden_weights: false,
        }
    }

    pub fn stack_config(&self, input_units: usize, classes: usize) -> Result<StackConfig> {
        let mut cfg = StackConfig::from_arch(self.arch, input_units, self.state_units, classes)?;
        cfg.tie_gate_hidden_weights = self.tie_gate_hidden_weights;
        Ok(cfg)
    }

    pub fn build(&self, input_units: usize, classes: usize, seed: u64) -> Result<Model> {
        Model::new(self.stack_config(input_units, classes)?, seed)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum Preprocess {
    #[default]
    None,
    /// PCA fitted on each training split, keeping this energy fraction.
    Pca(f64),
}

#[derive(Clone, Debug)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    /// Training metrics per epoch.
    pub history: Vec<Metrics>,
    pub test: Metrics,
    pub model: Model,
    pub transform: Option<PcaTransform>,
}

#[derive(Clone, Debug)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
}

impl CvReport {
    pub fn mean_accuracy(&self) -> f64 {
        if self.folds.is_empty() {
            return 0.0;
        }
        self.folds.iter().map(|f| f.test.accuracy()).sum::<f64>() / self.folds.len() as f64
    }
}

/// Trains and tests one model per split. Splits run concurrently under
/// [`Execution::Parallel`]; each uses `config.seed` for initialisation.
pub fn cross_validate(
    dataset: &Dataset,
    spec: &ModelSpec,
    plan: &SplitPlan,
    config: &TrainConfig,
    preprocess: Preprocess,
    exec: Execution,
) -> Result<CvReport> {
    config.validate()?;
    let splits = make_splits(dataset, plan)?;
    let folds = exec::map_range(exec, splits.len(), |fold| -> Result<FoldResult> {
        let split = &splits[fold];
        let mut train = dataset.subset(&split.train);
        let mut test = dataset.subset(&split.test);
        let transform = match preprocess {
            Preprocess::None => None,
            Preprocess::Pca(energy) => {
                let t = fit_preprocess(&train, energy)?;
                train = apply_preprocess(&t, &train)?;
                test = apply_preprocess(&t, &test)?;
                Some(t)
            }
        };
        let mut model = spec.build(train.feature_dim(), dataset.classes(), config.seed)?;
        let mut trainer = Trainer::new(config.clone())?;
        let history = trainer.fit(&mut model, &train)?;
        let test_metrics = evaluate_with(&model, &test, Execution::Sequential)?;
        Ok(FoldResult {
            fold,
            train_size: train.len(),
            test_size: test.len(),
            history,
            test: test_metrics,
            model,
            transform,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(CvReport { folds })
}
