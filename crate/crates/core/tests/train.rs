mod common;

use common::model;
use d2rnn::backprop::backward;
use d2rnn::cells::dos_energy;
use d2rnn::data::{gen_synthetic, Dataset, Sequence, SplitPlan, SynthSpec, SynthTask};
use d2rnn::exec::Execution;
use d2rnn::numerics::Vector;
use d2rnn::train::{
    checkpoint_load, checkpoint_save, cross_validate, evaluate_with, objective, sgd_epoch, LossMode, ModelSpec,
    Preprocess, TrainConfig, Trainer,
};
use d2rnn::ErrorClass;

fn small_data(seed: u64) -> Dataset {
    gen_synthetic(&SynthSpec::new(SynthTask::Velocity, 2, 24, 8, 4, 0.05, seed)).unwrap()
}

#[test]
fn zero_learning_rate_is_identity() {
    let data = small_data(1);
    let mut m = model("d2rnn:2", 4, 5, 2, 3);
    let before = m.clone();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        ..TrainConfig::default()
    };
    sgd_epoch(&mut m, &data, &cfg, 0).unwrap();
    assert_eq!(m, before);
}

#[test]
fn update_is_exactly_minus_lr_times_gradient() {
    let data = small_data(2);
    let one = data.subset(&[0]);
    let mut m = model("dos:1", 4, 5, 2, 4);
    let cfg = TrainConfig {
        learning_rate: 0.05,
        ..TrainConfig::default()
    };
    let seq = &one.sequences[0];
    let tape = m.forward(&seq.frames).unwrap();
    let (_, dl) = objective(&tape, &seq.target(LossMode::Sequence)).unwrap();
    let g = backward(&m, &tape, &dl, cfg.truncation).unwrap();
    let mut expect = m.params.clone();
    expect.axpy(-0.05, g.params()).unwrap();
    sgd_epoch(&mut m, &one, &cfg, 0).unwrap();
    assert_eq!(m.params, expect);
}

#[test]
fn single_example_loss_does_not_increase() {
    let data = small_data(3).subset(&[5]);
    let mut m = model("d2rnn:3", 4, 4, 2, 5);
    let cfg = TrainConfig {
        learning_rate: 0.01,
        epochs: 5,
        ..TrainConfig::default()
    };
    let history = Trainer::new(cfg).unwrap().fit(&mut m, &data).unwrap();
    let final_loss = evaluate_with(&m, &data, Execution::Sequential).unwrap().mean_loss;
    let mut losses: Vec<f64> = history.iter().map(|h| h.mean_loss).collect();
    losses.push(final_loss);
    for w in losses.windows(2) {
        assert!(w[1] <= w[0], "{losses:?}");
    }
}

#[test]
fn training_is_deterministic() {
    let data = small_data(4);
    let cfg = TrainConfig {
        learning_rate: 0.01,
        epochs: 3,
        seed: 9,
        ..TrainConfig::default()
    };
    let run = || {
        let mut m = model("drnn:2", 4, 4, 2, 1);
        let h = Trainer::new(cfg.clone()).unwrap().fit(&mut m, &data).unwrap();
        (m, h)
    };
    assert_eq!(run(), run());
}

#[test]
fn momentum_and_clipping_train() {
    let data = small_data(5);
    let cfg = TrainConfig {
        learning_rate: 0.01,
        epochs: 4,
        momentum: 0.5,
        clip_norm: Some(0.5),
        ..TrainConfig::default()
    };
    let mut m = model("lstm", 4, 4, 2, 1);
    let h = Trainer::new(cfg).unwrap().fit(&mut m, &data).unwrap();
    assert_eq!(h.len(), 4);
    assert!(h.iter().all(|e| e.mean_loss.is_finite()));
}

#[test]
fn divergence_aborts_with_numerical_error() {
    let data = small_data(6);
    let mut m = model("lstm", 4, 4, 2, 1);
    m.params.output.b_y[0] = f64::INFINITY;
    let err = sgd_epoch(&mut m, &data, &TrainConfig::default(), 0).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Numerical);
}

#[test]
fn confusion_rows_match_class_counts() {
    let data = small_data(7);
    let m = model("stacked:2", 4, 3, 2, 2);
    let metrics = evaluate_with(&m, &data, Execution::Parallel).unwrap();
    let rows: Vec<usize> = metrics.confusion.rows().iter().map(|r| r.iter().sum()).collect();
    assert_eq!(rows, data.class_counts());
    assert_eq!(
        metrics.accuracy(),
        metrics.confusion.trace() as f64 / data.len() as f64
    );
    assert_eq!(metrics, evaluate_with(&m, &data, Execution::Sequential).unwrap());
}

#[test]
fn constant_predictor_scores_half_on_balanced_data() {
    let data = small_data(8);
    let mut m = model("lstm", 4, 3, 2, 2);
    m.params.output.w_yh.as_mut_slice().fill(0.0);
    m.params.output.b_y = Vector::from(vec![0.0, 1.0]);
    let metrics = evaluate_with(&m, &data, Execution::Sequential).unwrap();
    assert_eq!(metrics.accuracy(), 0.5);
}

#[test]
fn perfect_predictions_give_diagonal_confusion() {
    // Two sequences whose last frame sign decides the class.
    let seqs = vec![
        Sequence::new("a", 0, vec![Vector::from(vec![-1.0])]),
        Sequence::new("b", 1, vec![Vector::from(vec![1.0])]),
    ];
    let data = Dataset::new(vec!["neg".into(), "pos".into()], seqs).unwrap();
    let mut m = model("rnn", 1, 1, 2, 0);
    let d2rnn::cells::CellParams::Rnn(p) = &mut m.params.layers[0] else { panic!() };
    p.w_hx.set(0, 0, 5.0);
    p.w_hh.set(0, 0, 0.0);
    m.params.output.w_yh = d2rnn::numerics::Matrix::from_rows(&[vec![-3.0], vec![3.0]]).unwrap();
    let metrics = evaluate_with(&m, &data, Execution::Sequential).unwrap();
    assert_eq!(metrics.confusion.rows(), &[vec![1, 0], vec![0, 1]]);
}

#[test]
fn checkpoint_reuse_reproduces_energy_curves() {
    let data = small_data(9);
    let m = model("d2rnn:3", 4, 4, 2, 6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    checkpoint_save(&m, &path).unwrap();
    let loaded = checkpoint_load(&path).unwrap();
    let frames = &data.sequences[0].frames;
    for layer in 0..3 {
        assert_eq!(dos_energy(&m, frames, layer).unwrap(), dos_energy(&loaded, frames, layer).unwrap());
    }
}

#[test]
fn cross_validation_runs_every_fold() {
    let data = small_data(10);
    let spec = ModelSpec::new("dos:1".parse().unwrap(), 3);
    let cfg = TrainConfig {
        learning_rate: 0.01,
        epochs: 2,
        ..TrainConfig::default()
    };
    let plan = SplitPlan::KFold {
        k: 4,
        seed: 1,
        by_group: false,
    };
    let par = cross_validate(&data, &spec, &plan, &cfg, Preprocess::None, Execution::Parallel).unwrap();
    let seq = cross_validate(&data, &spec, &plan, &cfg, Preprocess::None, Execution::Sequential).unwrap();
    assert_eq!(par.folds.len(), 4);
    assert_eq!(par.folds.iter().map(|f| f.test_size).sum::<usize>(), data.len());
    for (a, b) in par.folds.iter().zip(&seq.folds) {
        assert_eq!(a.model, b.model);
        assert_eq!(a.test, b.test);
    }

    let pca = cross_validate(&data, &spec, &plan, &cfg, Preprocess::Pca(0.9), Execution::Sequential).unwrap();
    for f in &pca.folds {
        let t = f.transform.as_ref().unwrap();
        assert_eq!(f.model.config.input_units, t.basis.rows());
        assert!(t.basis.rows() <= 4);
    }
}
