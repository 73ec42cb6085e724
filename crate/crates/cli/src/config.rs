//! Run configuration: a TOML file plus command-line overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use d2rnn::backprop::Truncation;
use d2rnn::cells::Arch;
use d2rnn::data::{SplitPlan, SynthSpec, SynthTask};
use d2rnn::ensemble::BoostVariant;
use d2rnn::exec::Execution;
use d2rnn::train::{LossMode, ModelSpec, Preprocess, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// File name of the effective-config echo written to every output directory.
pub const ECHO_FILE: &str = "config.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub parallel: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub synth: SynthSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub split: SplitSection,
    pub ensemble: EnsembleSection,
    pub gradcheck: GradcheckSection,
    pub dos_energy: DosEnergySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            parallel: true,
            data: None,
            checkpoint: None,
            synth: SynthSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            split: SplitSection::default(),
            ensemble: EnsembleSection::default(),
            gradcheck: GradcheckSection::default(),
            dos_energy: DosEnergySection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub task: SynthTask,
    pub classes: usize,
    pub count: usize,
    pub len: usize,
    pub dim: usize,
    pub noise: f64,
    pub rate_step: f64,
    pub curvature_step: f64,
    pub offset_scale: f64,
    pub gain: f64,
    /// Highest DoS order the data is meant for; short sequences trigger a warning.
    pub order: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthSpec::new(SynthTask::Velocity, 2, 100, 20, 16, 0.1, 0);
        SynthSection {
            task: s.task,
            classes: s.classes,
            count: s.count,
            len: s.len,
            dim: s.dim,
            noise: s.noise_sigma,
            rate_step: s.rate_step,
            curvature_step: s.curvature_step,
            offset_scale: s.offset_scale,
            gain: s.gain,
            order: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub arch: String,
    pub state_units: usize,
    pub tie_gate_hidden_weights: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            arch: "d2rnn:3".into(),
            state_units: 16,
            tie_gate_hidden_weights: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub mode: LossMode,
    pub truncation: Truncation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,
    pub shuffle: bool,
    pub momentum: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            mode: t.mode,
            truncation: t.truncation,
            clip_norm: t.clip_norm,
            shuffle: t.shuffle,
            momentum: t.momentum,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    /// `kfold:K`, `mc:FRACTION:TRIALS` or `none`.
    pub plan: String,
    pub by_group: bool,
    /// PCA energy fraction fitted on each training split.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pca: Option<f64>,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            plan: "kfold:5".into(),
            by_group: false,
            pca: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub max_order: usize,
    pub variant: BoostVariant,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            max_order: 2,
            variant: BoostVariant::Samme,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    pub input_units: usize,
    pub state_units: usize,
    pub classes: usize,
    pub len: usize,
    pub mode: LossMode,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        GradcheckSection {
            input_units: 4,
            state_units: 6,
            classes: 3,
            len: 6,
            mode: LossMode::Sequence,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DosEnergySection {
    pub layer: usize,
    /// Index of the sequence within the data file.
    pub sequence: usize,
}

/// What was run, from which file, with which overrides, and the resulting
/// effective configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_file: Option<PathBuf>,
    pub out: PathBuf,
    #[serde(default)]
    pub overrides: BTreeMap<String, toml::Value>,
    pub config: RunConfig,
}

impl RunSpec {
    pub fn to_toml(&self) -> Result<String, Failure> {
        toml::to_string(self).map_err(|e| Failure::Data(format!("cannot serialise config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<RunSpec, Failure> {
        toml::from_str(text).map_err(|e| Failure::Usage(format!("bad run spec: {e}")))
    }

    /// Writes the effective configuration to `out/config.toml`.
    pub fn echo(&self) -> Result<PathBuf, Failure> {
        let path = self.out.join(ECHO_FILE);
        fs::write(&path, self.to_toml()?).map_err(|e| Failure::io(&path, e))?;
        Ok(path)
    }
}

/// Reads a config file. An echoed run spec is accepted too; its `config` table is used.
pub fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let bad = |e: toml::de::Error| Failure::Usage(format!("{}: {e}", path.display()));
    let table: toml::Table = toml::from_str(&text).map_err(bad)?;
    if table.contains_key("command") {
        return RunSpec::from_toml(&text).map(|spec| spec.config);
    }
    table.try_into().map_err(bad)
}

impl RunConfig {
    pub fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    pub fn arch(&self) -> Result<Arch, Failure> {
        self.model.arch.parse().map_err(|e: d2rnn::Error| Failure::Usage(e.to_string()))
    }

    pub fn model_spec(&self) -> Result<ModelSpec, Failure> {
        let mut spec = ModelSpec::new(self.arch()?, self.model.state_units);
        spec.tie_gate_hidden_weights = self.model.tie_gate_hidden_weights;
        Ok(spec)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            mode: t.mode,
            truncation: t.truncation,
            seed: self.seed,
            clip_norm: t.clip_norm,
            shuffle: t.shuffle,
            momentum: t.momentum,
        }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        let s = &self.synth;
        let mut spec = SynthSpec::new(s.task, s.classes, s.count, s.len, s.dim, s.noise, self.seed);
        spec.rate_step = s.rate_step;
        spec.curvature_step = s.curvature_step;
        spec.offset_scale = s.offset_scale;
        spec.gain = s.gain;
        spec
    }

    /// `None` means train and test on the whole dataset.
    pub fn split_plan(&self) -> Result<Option<SplitPlan>, Failure> {
        parse_split(&self.split.plan, self.seed, self.split.by_group)
    }

    pub fn preprocess(&self) -> Preprocess {
        self.split.pca.map_or(Preprocess::None, Preprocess::Pca)
    }
}

pub fn parse_split(text: &str, seed: u64, by_group: bool) -> Result<Option<SplitPlan>, Failure> {
    let bad = || Failure::Usage(format!("bad split '{text}' (expected kfold:K, mc:FRACTION:TRIALS or none)"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        ["none"] => Ok(None),
        ["kfold", k] => Ok(Some(SplitPlan::KFold {
            k: k.parse().map_err(|_| bad())?,
            seed,
            by_group,
        })),
        ["mc", f, n] => Ok(Some(SplitPlan::MonteCarlo {
            train_fraction: f.parse().map_err(|_| bad())?,
            trials: n.parse().map_err(|_| bad())?,
            seed,
        })),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let spec = RunSpec {
            command: "train".into(),
            config_file: Some("run.toml".into()),
            out: "runs/a".into(),
            overrides: [("train.learning_rate".to_string(), toml::Value::Float(0.01))].into(),
            config: RunConfig {
                data: Some("d.jsonl".into()),
                ..RunConfig::default()
            },
        };
        let text = spec.to_toml().unwrap();
        assert_eq!(RunSpec::from_toml(&text).unwrap(), spec);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(ECHO_FILE);
        fs::write(&path, &text).unwrap();
        assert_eq!(load_config(&path).unwrap(), spec.config);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = toml::from_str::<RunConfig>("[train]\nlearning_rat = 0.1\n").unwrap_err();
        assert!(e.to_string().contains("learning_rat"), "{e}");
        assert!(toml::from_str::<RunConfig>("colour = 1\n").is_err());
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let c: RunConfig = toml::from_str("seed = 7\n[model]\narch = \"lstm\"\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.arch().unwrap(), Arch::Lstm);
        assert_eq!(c.model.state_units, ModelSection::default().state_units);
        assert_eq!(c.train, TrainSection::default());
    }

    #[test]
    fn split_strings() {
        assert_eq!(parse_split("none", 1, false).unwrap(), None);
        assert_eq!(
            parse_split("kfold:4", 9, true).unwrap(),
            Some(SplitPlan::KFold { k: 4, seed: 9, by_group: true })
        );
        assert_eq!(
            parse_split("mc:0.8:3", 2, false).unwrap(),
            Some(SplitPlan::MonteCarlo {
                train_fraction: 0.8,
                trials: 3,
                seed: 2
            })
        );
        for bad in ["kfold", "kfold:x", "mc:0.5", "loo", ""] {
            assert!(matches!(parse_split(bad, 0, false), Err(Failure::Usage(_))), "{bad}");
        }
    }
}
