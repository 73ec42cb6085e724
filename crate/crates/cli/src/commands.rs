use std::fs;
use std::path::{Path, PathBuf};

use d2rnn::backprop::grad_check;
use d2rnn::cells::{dos_energy as layer_dos_energy, Arch, Model};
use d2rnn::data::{
    apply_preprocess, fit_preprocess, gen_synthetic, load_jsonl, make_splits, save_jsonl, Dataset, Split,
};
use d2rnn::ensemble::{ensemble_save, fit_ernn, EnsembleConfig};
use d2rnn::exec::{self, Execution};
use d2rnn::numerics::{PcaTransform, Rng};
use d2rnn::train::{
    checkpoint_load, checkpoint_save, cross_validate, evaluate_with, ConfusionMatrix, CvReport, FoldResult, LossMode,
    Preprocess, Target, Trainer,
};

use crate::config::RunSpec;
use crate::output::{confusion_table, ensure_dir, num, short, Table};
use crate::{Failure, EXIT_NUMERICAL, EXIT_OK};

pub const DATA_FILE: &str = "data.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const LOSS_CURVE_FILE: &str = "loss_curve.csv";
pub const GRADCHECK_FILE: &str = "gradcheck.tsv";
pub const DOS_ENERGY_FILE: &str = "dos_energy.csv";
pub const FOLDS_FILE: &str = "folds.csv";

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    path.as_deref()
        .ok_or_else(|| Failure::Usage(format!("--{flag} is required")))
}

fn load(path: &Path) -> Result<Dataset, Failure> {
    load_jsonl(path).map_err(|e| match e {
        d2rnn::Error::Io(io) => Failure::io(path, io),
        e => e.into(),
    })
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    checkpoint_load(path).map_err(|e| match e {
        d2rnn::Error::Io(io) => Failure::io(path, io),
        e => e.into(),
    })
}

fn save_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), Failure> {
    let text = serde_json::to_string(value).map_err(|e| Failure::Data(e.to_string()))?;
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

pub fn synth(spec: &RunSpec) -> Result<i32, Failure> {
    let c = &spec.config;
    let ds = gen_synthetic(&c.synth_spec())?;
    let path = spec.out.join(DATA_FILE);
    save_jsonl(&ds, &path)?;
    let full_windows = c.synth.len.saturating_sub(c.synth.order);
    if full_windows < 2 {
        eprintln!(
            "warning: length {} leaves {full_windows} frame(s) with a complete order-{} DoS window",
            c.synth.len, c.synth.order
        );
    }
    let mut t = Table::new(["class", "count"]);
    for (name, n) in ds.class_names.iter().zip(ds.class_counts()) {
        t.push(vec![name.clone(), n.to_string()]);
    }
    println!("wrote {} sequences to {}", ds.len(), path.display());
    println!("{}", t.render());
    Ok(EXIT_OK)
}

/// Trains on the whole dataset and tests on it too.
fn fit_whole(dataset: &Dataset, spec: &RunSpec) -> Result<FoldResult, Failure> {
    let c = &spec.config;
    let (train, transform) = match c.preprocess() {
        Preprocess::None => (dataset.clone(), None),
        Preprocess::Pca(energy) => {
            let t = fit_preprocess(dataset, energy)?;
            (apply_preprocess(&t, dataset)?, Some(t))
        }
    };
    let config = c.train_config();
    let mut model = c.model_spec()?.build(train.feature_dim(), train.classes(), config.seed)?;
    let history = Trainer::new(config)?.fit(&mut model, &train)?;
    let test = evaluate_with(&model, &train, c.execution())?;
    Ok(FoldResult {
        fold: 0,
        train_size: train.len(),
        test_size: train.len(),
        history,
        test,
        model,
        transform,
    })
}

pub fn train(spec: &RunSpec) -> Result<i32, Failure> {
    let c = &spec.config;
    let dataset = load(required(&c.data, "data")?)?;
    let report = match c.split_plan()? {
        Some(plan) => cross_validate(
            &dataset,
            &c.model_spec()?,
            &plan,
            &c.train_config(),
            c.preprocess(),
            c.execution(),
        )?,
        None => CvReport {
            folds: vec![fit_whole(&dataset, spec)?],
        },
    };

    let models = spec.out.join("models");
    ensure_dir(&models)?;
    let mut metrics = Table::new(["fold", "train_size", "test_size", "accuracy", "test_loss", "train_loss"]);
    let mut curve = Table::new(["fold", "epoch", "train_loss", "train_accuracy"]);
    let mut confusion = ConfusionMatrix::new(dataset.classes());
    for f in &report.folds {
        let last = f.history.last().map_or(f64::NAN, |m| m.mean_loss);
        metrics.push(vec![
            f.fold.to_string(),
            f.train_size.to_string(),
            f.test_size.to_string(),
            num(f.test.accuracy()),
            num(f.test.mean_loss),
            num(last),
        ]);
        for (e, m) in f.history.iter().enumerate() {
            curve.push(vec![f.fold.to_string(), (e + 1).to_string(), num(m.mean_loss), num(m.accuracy())]);
        }
        confusion.merge(&f.test.confusion);
        checkpoint_save(&f.model, models.join(format!("fold{}.json", f.fold)))?;
        if let Some(t) = &f.transform {
            save_json(t, &models.join(format!("fold{}.pca.json", f.fold)))?;
        }
    }
    let k = report.folds.len() as f64;
    let mean = |g: &dyn Fn(&FoldResult) -> f64| report.folds.iter().map(g).sum::<f64>() / k;
    metrics.push(vec![
        "mean".into(),
        String::new(),
        String::new(),
        num(report.mean_accuracy()),
        num(mean(&|f| f.test.mean_loss)),
        num(mean(&|f| f.history.last().map_or(f64::NAN, |m| m.mean_loss))),
    ]);
    metrics.write_csv(&spec.out.join(METRICS_FILE))?;
    curve.write_csv(&spec.out.join(LOSS_CURVE_FILE))?;
    confusion_table(&confusion, &dataset.class_names).write_csv(&spec.out.join(CONFUSION_FILE))?;

    let mut shown = Table::new(["fold", "accuracy", "test_loss", "train_loss"]);
    for row in &metrics.rows {
        shown.push(vec![
            row[0].clone(),
            short(row[3].parse().unwrap_or(f64::NAN)),
            short(row[4].parse().unwrap_or(f64::NAN)),
            short(row[5].parse().unwrap_or(f64::NAN)),
        ]);
    }
    println!("{} on {} sequences, {} fold(s)", c.model.arch, dataset.len(), report.folds.len());
    println!("{}", shown.render());
    println!("mean accuracy {}", short(report.mean_accuracy()));
    Ok(EXIT_OK)
}

pub fn eval(spec: &RunSpec, transform: Option<&Path>) -> Result<i32, Failure> {
    let c = &spec.config;
    let model = load_model(required(&c.checkpoint, "checkpoint")?)?;
    let mut dataset = load(required(&c.data, "data")?)?;
    if let Some(path) = transform {
        let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let t: PcaTransform =
            serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        dataset = apply_preprocess(&t, &dataset)?;
    }
    let m = evaluate_with(&model, &dataset, c.execution())?;
    let mut t = Table::new(["sequences", "accuracy", "mean_loss"]);
    t.push(vec![dataset.len().to_string(), num(m.accuracy()), num(m.mean_loss)]);
    t.write_csv(&spec.out.join(METRICS_FILE))?;
    confusion_table(&m.confusion, &dataset.class_names).write_csv(&spec.out.join(CONFUSION_FILE))?;
    println!("accuracy {} mean loss {}", short(m.accuracy()), short(m.mean_loss));
    Ok(EXIT_OK)
}

pub fn gradcheck(spec: &RunSpec) -> Result<i32, Failure> {
    let c = &spec.config;
    let g = &c.gradcheck;
    if g.len == 0 || g.classes == 0 {
        return Err(Failure::Usage("gradcheck needs len and classes of at least 1".into()));
    }
    let mut model_spec = c.model_spec()?;
    model_spec.state_units = g.state_units;
    let model = model_spec.build(g.input_units, g.classes, c.seed)?;
    let mut rng = Rng::new(c.seed.wrapping_add(1));
    let frames: Vec<_> = (0..g.len)
        .map(|_| (0..g.input_units).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();
    let target = match g.mode {
        LossMode::Sequence => Target::Sequence(rng.index(g.classes)),
        LossMode::Frame => Target::Frames((0..g.len).map(|_| rng.index(g.classes)).collect()),
    };
    let report = grad_check(&model, &frames, &target)?;
    let path = spec.out.join(GRADCHECK_FILE);
    fs::write(&path, format!("{report}\n")).map_err(|e| Failure::io(&path, e))?;
    let worst = report
        .worst()
        .map_or(String::new(), |w| format!(" worst {}[{}]", w.param, w.index));
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    println!(
        "{verdict} {}: {} parameters, max relative error {:e} (tolerance {:e}){worst}",
        c.model.arch,
        report.entries.len(),
        report.max_rel_error(),
        report.tolerance
    );
    Ok(if report.passed() { EXIT_OK } else { EXIT_NUMERICAL })
}

pub fn dos_energy(spec: &RunSpec) -> Result<i32, Failure> {
    let c = &spec.config;
    let model = load_model(required(&c.checkpoint, "checkpoint")?)?;
    let dataset = load(required(&c.data, "data")?)?;
    let idx = c.dos_energy.sequence;
    let seq = dataset.sequences.get(idx).ok_or_else(|| {
        Failure::Usage(format!("sequence {idx} out of range ({} in file)", dataset.len()))
    })?;
    let rows = layer_dos_energy(&model, &seq.frames, c.dos_energy.layer)?;
    let orders = rows.first().map_or(0, Vec::len);
    let mut t = Table::new(std::iter::once("frame".to_string()).chain((0..orders).map(|n| format!("order{n}"))));
    for (frame, r) in rows.iter().enumerate() {
        t.push(std::iter::once(frame.to_string()).chain(r.iter().map(|&v| num(v))).collect());
    }
    let path = spec.out.join(DOS_ENERGY_FILE);
    t.write_csv(&path)?;
    println!(
        "wrote {} frames x {orders} orders for sequence '{}' layer {} to {}",
        rows.len(),
        seq.id,
        c.dos_energy.layer,
        path.display()
    );
    Ok(EXIT_OK)
}

struct EnsembleFold {
    /// Member accuracies by order, then the ensemble accuracy.
    accuracies: Vec<f64>,
    weights: Vec<f64>,
    confusion: ConfusionMatrix,
}

pub fn ensemble(spec: &RunSpec) -> Result<i32, Failure> {
    let c = &spec.config;
    let dataset = load(required(&c.data, "data")?)?;
    let splits = match c.split_plan()? {
        Some(plan) => make_splits(&dataset, &plan)?,
        None => vec![Split {
            train: (0..dataset.len()).collect(),
            test: (0..dataset.len()).collect(),
        }],
    };
    let config = EnsembleConfig {
        max_order: c.ensemble.max_order,
        state_units: c.model.state_units,
        train: c.train_config(),
        variant: c.ensemble.variant,
    };
    let exec = c.execution();
    let models = spec.out.join("models");
    ensure_dir(&models)?;
    let folds = exec::map_range(exec, splits.len(), |k| -> Result<EnsembleFold, Failure> {
        let mut train = dataset.subset(&splits[k].train);
        let mut test = dataset.subset(&splits[k].test);
        if let Some(energy) = c.split.pca {
            let t = fit_preprocess(&train, energy)?;
            train = apply_preprocess(&t, &train)?;
            test = apply_preprocess(&t, &test)?;
        }
        let e = fit_ernn(&train, &config, Execution::Sequential)?;
        ensemble_save(&e, models.join(format!("ensemble_fold{k}.json")))?;
        let mut accuracies = Vec::with_capacity(e.members.len() + 1);
        for m in &e.members {
            accuracies.push(evaluate_with(&m.model, &test, Execution::Sequential)?.accuracy());
        }
        let confusion = e.evaluate(&test, Execution::Sequential)?;
        accuracies.push(confusion.accuracy());
        Ok(EnsembleFold {
            accuracies,
            weights: e.members.iter().map(|m| m.weight).collect(),
            confusion,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let names: Vec<String> = (0..=config.max_order)
        .map(|n| Arch::Dos(n).to_string())
        .chain(["ernn".to_string()])
        .collect();
    let mut per_fold = Table::new(["fold", "model", "weight", "accuracy"]);
    let mut confusion = ConfusionMatrix::new(dataset.classes());
    for (k, f) in folds.iter().enumerate() {
        for (i, name) in names.iter().enumerate() {
            let weight = f.weights.get(i).map_or(String::new(), |&w| num(w));
            per_fold.push(vec![k.to_string(), name.clone(), weight, num(f.accuracies[i])]);
        }
        confusion.merge(&f.confusion);
    }
    let k = folds.len() as f64;
    let mut summary = Table::new(["model", "mean_weight", "mean_accuracy"]);
    let mut shown = Table::new(["model", "mean_weight", "mean_accuracy"]);
    for (i, name) in names.iter().enumerate() {
        let acc = folds.iter().map(|f| f.accuracies[i]).sum::<f64>() / k;
        let weight = (i < names.len() - 1).then(|| folds.iter().map(|f| f.weights[i]).sum::<f64>() / k);
        summary.push(vec![name.clone(), weight.map_or(String::new(), num), num(acc)]);
        shown.push(vec![name.clone(), weight.map_or(String::new(), short), short(acc)]);
    }
    summary.write_csv(&spec.out.join(METRICS_FILE))?;
    per_fold.write_csv(&spec.out.join(FOLDS_FILE))?;
    confusion_table(&confusion, &dataset.class_names).write_csv(&spec.out.join(CONFUSION_FILE))?;
    println!("eRNN over DoS orders 0..={} on {} sequences, {} fold(s)", config.max_order, dataset.len(), folds.len());
    println!("{}", shown.render());
    Ok(EXIT_OK)
}
