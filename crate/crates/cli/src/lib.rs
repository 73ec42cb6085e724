//! Command-line front end: synthetic data, training with cross-validation,
//! evaluation, gradient checks, DoS energy export and boosted ensembles.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use d2rnn::ErrorClass;
use serde::de::value::{Error as ValueError, StrDeserializer};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub mod commands;
pub mod config;
pub mod output;
pub mod trend;

use config::{load_config, RunConfig, RunSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Data(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<d2rnn::Error> for Failure {
    fn from(e: d2rnn::Error) -> Self {
        let msg = e.to_string();
        match e.class() {
            ErrorClass::Usage => Failure::Usage(msg),
            ErrorClass::Data => Failure::Data(msg),
            ErrorClass::Numerical => Failure::Numerical(msg),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "d2rnn", version, about = "Differential recurrent sequence classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic trajectory dataset as JSONL.
    Synth(SynthArgs),
    /// Train with cross-validation and write metrics, loss curves and checkpoints.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences on a random instance.
    Gradcheck(GradcheckArgs),
    /// Export per-frame DoS energy of one layer for one sequence.
    DosEnergy(DosEnergyArgs),
    /// Boost single-order DoS models and compare the ensemble with its members.
    Ensemble(EnsembleArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Run folds and evaluation on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// velocity, acceleration or mixed.
    #[arg(long, value_parser = enum_arg::<d2rnn::data::SynthTask>)]
    pub task: Option<d2rnn::data::SynthTask>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub len: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Highest DoS order the data is meant for.
    #[arg(long)]
    pub order: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// lstm, stacked:L, drnn:N, d2rnn:L, dos:n or rnn.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub state_units: Option<usize>,
    /// Reuse the input-gate hidden weights for the forget and output gates.
    #[arg(long)]
    pub tie_gates: bool,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// kfold:K, mc:FRACTION:TRIALS or none.
    #[arg(long)]
    pub split: Option<String>,
    /// Keep whole groups together in k-fold splits.
    #[arg(long)]
    pub by_group: bool,
    /// PCA energy fraction fitted per training split.
    #[arg(long)]
    pub pca: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// sequence or frame.
    #[arg(long, value_parser = enum_arg::<d2rnn::train::LossMode>)]
    pub mode: Option<d2rnn::train::LossMode>,
    /// full or truncated.
    #[arg(long, value_parser = enum_arg::<d2rnn::backprop::Truncation>)]
    pub truncation: Option<d2rnn::backprop::Truncation>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Visit sequences in file order every epoch.
    #[arg(long)]
    pub no_shuffle: bool,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// PCA transform written by `train --pca`.
    #[arg(long)]
    pub transform: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub input_units: Option<usize>,
    #[arg(long)]
    pub state_units: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub len: Option<usize>,
    #[arg(long, value_parser = enum_arg::<d2rnn::train::LossMode>)]
    pub mode: Option<d2rnn::train::LossMode>,
    #[arg(long)]
    pub tie_gates: bool,
}

#[derive(Args, Debug, Clone)]
pub struct DosEnergyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub layer: Option<usize>,
    /// Index of the sequence in the data file.
    #[arg(long)]
    pub sequence: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub max_order: Option<usize>,
    /// samme or m1.
    #[arg(long, value_parser = enum_arg::<d2rnn::ensemble::BoostVariant>)]
    pub variant: Option<d2rnn::ensemble::BoostVariant>,
    #[arg(long)]
    pub state_units: Option<usize>,
    #[command(flatten)]
    pub fit: FitArgs,
}

fn enum_arg<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    T::deserialize(StrDeserializer::<ValueError>::new(s)).map_err(|e| e.to_string())
}

/// Flag values applied on top of the config file, recorded by dotted key.
struct Overrides<'a> {
    config: &'a mut RunConfig,
    log: BTreeMap<String, toml::Value>,
}

impl Overrides<'_> {
    fn set<T: Serialize + Clone>(&mut self, key: &str, value: Option<&T>, slot: impl FnOnce(&mut RunConfig) -> &mut T) {
        if let Some(v) = value {
            *slot(self.config) = v.clone();
            if let Ok(tv) = toml::Value::try_from(v) {
                self.log.insert(key.to_string(), tv);
            }
        }
    }

    fn flag(&mut self, key: &str, on: bool, slot: impl FnOnce(&mut RunConfig) -> &mut bool, value: bool) {
        if on {
            self.set(key, Some(&value), slot);
        }
    }

    fn model(&mut self, m: &ModelArgs) {
        self.set("model.arch", m.arch.as_ref(), |c| &mut c.model.arch);
        self.set("model.state_units", m.state_units.as_ref(), |c| &mut c.model.state_units);
        self.flag("model.tie_gate_hidden_weights", m.tie_gates, |c| &mut c.model.tie_gate_hidden_weights, true);
    }

    fn fit(&mut self, f: &FitArgs) {
        self.set("data", f.data.clone().map(Some).as_ref(), |c| &mut c.data);
        self.set("split.plan", f.split.as_ref(), |c| &mut c.split.plan);
        self.flag("split.by_group", f.by_group, |c| &mut c.split.by_group, true);
        self.set("split.pca", f.pca.map(Some).as_ref(), |c| &mut c.split.pca);
        self.set("train.learning_rate", f.lr.as_ref(), |c| &mut c.train.learning_rate);
        self.set("train.epochs", f.epochs.as_ref(), |c| &mut c.train.epochs);
        self.set("train.mode", f.mode.as_ref(), |c| &mut c.train.mode);
        self.set("train.truncation", f.truncation.as_ref(), |c| &mut c.train.truncation);
        self.set("train.clip_norm", f.clip_norm.map(Some).as_ref(), |c| &mut c.train.clip_norm);
        self.set("train.momentum", f.momentum.as_ref(), |c| &mut c.train.momentum);
        self.flag("train.shuffle", f.no_shuffle, |c| &mut c.train.shuffle, false);
    }
}

/// Loads the config file, applies flag overrides and prepares the output
/// directory.
fn resolve(command: &str, common: &Common, apply: impl FnOnce(&mut Overrides)) -> Result<RunSpec, Failure> {
    let mut config = match &common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let mut o = Overrides {
        config: &mut config,
        log: BTreeMap::new(),
    };
    o.set("seed", common.seed.as_ref(), |c| &mut c.seed);
    o.flag("parallel", common.sequential, |c| &mut c.parallel, false);
    apply(&mut o);
    let overrides = o.log;
    output::ensure_dir(&common.out)?;
    Ok(RunSpec {
        command: command.to_string(),
        config_file: common.config.clone(),
        out: common.out.clone(),
        overrides,
        config,
    })
}

/// Resolves the effective run spec for parsed arguments without running it.
pub fn run_spec(cli: &Cli) -> Result<RunSpec, Failure> {
    match &cli.command {
        Command::Synth(a) => resolve("synth", &a.common, |o| {
            o.set("synth.task", a.task.as_ref(), |c| &mut c.synth.task);
            o.set("synth.classes", a.classes.as_ref(), |c| &mut c.synth.classes);
            o.set("synth.count", a.count.as_ref(), |c| &mut c.synth.count);
            o.set("synth.len", a.len.as_ref(), |c| &mut c.synth.len);
            o.set("synth.dim", a.dim.as_ref(), |c| &mut c.synth.dim);
            o.set("synth.noise", a.noise.as_ref(), |c| &mut c.synth.noise);
            o.set("synth.order", a.order.as_ref(), |c| &mut c.synth.order);
        }),
        Command::Train(a) => resolve("train", &a.common, |o| {
            o.model(&a.model);
            o.fit(&a.fit);
        }),
        Command::Eval(a) => resolve("eval", &a.common, |o| {
            o.set("checkpoint", a.checkpoint.clone().map(Some).as_ref(), |c| &mut c.checkpoint);
            o.set("data", a.data.clone().map(Some).as_ref(), |c| &mut c.data);
        }),
        Command::Gradcheck(a) => resolve("gradcheck", &a.common, |o| {
            o.set("model.arch", a.arch.as_ref(), |c| &mut c.model.arch);
            o.flag("model.tie_gate_hidden_weights", a.tie_gates, |c| &mut c.model.tie_gate_hidden_weights, true);
            o.set("gradcheck.input_units", a.input_units.as_ref(), |c| &mut c.gradcheck.input_units);
            o.set("gradcheck.state_units", a.state_units.as_ref(), |c| &mut c.gradcheck.state_units);
            o.set("gradcheck.classes", a.classes.as_ref(), |c| &mut c.gradcheck.classes);
            o.set("gradcheck.len", a.len.as_ref(), |c| &mut c.gradcheck.len);
            o.set("gradcheck.mode", a.mode.as_ref(), |c| &mut c.gradcheck.mode);
        }),
        Command::DosEnergy(a) => resolve("dos-energy", &a.common, |o| {
            o.set("checkpoint", a.checkpoint.clone().map(Some).as_ref(), |c| &mut c.checkpoint);
            o.set("data", a.data.clone().map(Some).as_ref(), |c| &mut c.data);
            o.set("dos_energy.layer", a.layer.as_ref(), |c| &mut c.dos_energy.layer);
            o.set("dos_energy.sequence", a.sequence.as_ref(), |c| &mut c.dos_energy.sequence);
        }),
        Command::Ensemble(a) => resolve("ensemble", &a.common, |o| {
            o.set("ensemble.max_order", a.max_order.as_ref(), |c| &mut c.ensemble.max_order);
            o.set("ensemble.variant", a.variant.as_ref(), |c| &mut c.ensemble.variant);
            o.set("model.state_units", a.state_units.as_ref(), |c| &mut c.model.state_units);
            o.fit(&a.fit);
        }),
    }
}

fn dispatch(cli: &Cli) -> Result<i32, Failure> {
    let spec = run_spec(cli)?;
    spec.echo()?;
    match &cli.command {
        Command::Synth(_) => commands::synth(&spec),
        Command::Train(_) => commands::train(&spec),
        Command::Eval(a) => commands::eval(&spec, a.transform.as_deref()),
        Command::Gradcheck(_) => commands::gradcheck(&spec),
        Command::DosEnergy(_) => commands::dos_energy(&spec),
        Command::Ensemble(_) => commands::ensemble(&spec),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

/// Reads back an effective-config echo.
pub fn read_echo(dir: &Path) -> Result<RunSpec, Failure> {
    let path = dir.join(config::ECHO_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::io(&path, e))?;
    RunSpec::from_toml(&text)
}
