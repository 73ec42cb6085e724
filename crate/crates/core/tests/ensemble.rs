mod common;

use d2rnn::cells::Arch;
use d2rnn::data::{gen_synthetic, SynthSpec, SynthTask};
use d2rnn::ensemble::{
    boost_round, ensemble_from_str, ensemble_to_string, fit_ernn, weighted_vote, BoostVariant, EnsembleConfig,
    EnsembleMember, EnsembleModel,
};
use d2rnn::exec::Execution;
use d2rnn::numerics::Rng;
use d2rnn::train::{ModelSpec, TrainConfig, Trainer};

fn close(a: &[f64], b: &[f64]) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
    }
}

#[test]
fn two_member_toy_matches_hand_computation() {
    // Examples A, B, C, D; member 1 misses A, member 2 misses B.
    let w0 = [0.25; 4];
    let r1 = boost_round(&w0, &[true, false, false, false], 2, BoostVariant::Samme).unwrap();
    assert!((r1.error - 0.25).abs() < 1e-12);
    assert!((r1.alpha - 3f64.ln()).abs() < 1e-12);
    close(&r1.weights, &[0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]);

    let r2 = boost_round(&r1.weights, &[false, true, false, false], 2, BoostVariant::Samme).unwrap();
    assert!((r2.error - 1.0 / 6.0).abs() < 1e-12);
    assert!((r2.alpha - 5f64.ln()).abs() < 1e-12);
    close(&r2.weights, &[0.3, 0.5, 0.1, 0.1]);

    // A third member missing C and D.
    let r3 = boost_round(&r2.weights, &[false, false, true, true], 2, BoostVariant::Samme).unwrap();
    assert!((r3.error - 0.2).abs() < 1e-12);
    assert!((r3.alpha - 4f64.ln()).abs() < 1e-12);
    close(&r3.weights, &[0.1875, 0.3125, 0.25, 0.25]);

    let alphas = [r1.alpha, r2.alpha, r3.alpha];
    // Member 1 alone outvoted by members 2 and 3 agreeing.
    let (c, s) = weighted_vote(&[1, 0, 0], &alphas, 2);
    assert_eq!(c, 0);
    close(s.as_slice(), &[20f64.ln(), 3f64.ln()]);
    // Members 1 and 3 (ln 12) outweigh member 2 (ln 5).
    let (c, s) = weighted_vote(&[1, 0, 1], &alphas, 2);
    assert_eq!(c, 1);
    close(s.as_slice(), &[5f64.ln(), 12f64.ln()]);
}

#[test]
fn weights_stay_normalised() {
    let mut rng = Rng::new(5);
    for k in [2, 3, 6] {
        let mut w = vec![1.0 / 40.0; 40];
        for _ in 0..30 {
            let misses: Vec<bool> = (0..40).map(|_| rng.next_f64() < 0.3).collect();
            let r = boost_round(&w, &misses, k, BoostVariant::Samme).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(r.alpha >= 0.0 && r.alpha.is_finite());
            w = r.weights;
        }
    }
}

fn toy_data() -> d2rnn::data::Dataset {
    gen_synthetic(&SynthSpec::new(SynthTask::Mixed, 4, 32, 8, 4, 0.05, 3)).unwrap()
}

fn config(max_order: usize) -> EnsembleConfig {
    EnsembleConfig {
        max_order,
        state_units: 4,
        train: TrainConfig {
            learning_rate: 0.02,
            epochs: 3,
            seed: 11,
            ..TrainConfig::default()
        },
        variant: BoostVariant::Samme,
    }
}

#[test]
fn order_zero_ensemble_is_the_single_model() {
    let data = toy_data();
    let cfg = config(0);
    let e = fit_ernn(&data, &cfg, Execution::Sequential).unwrap();
    assert_eq!(e.members.len(), 1);

    let mut single = ModelSpec::new(Arch::Dos(0), 4).build(4, 4, 11).unwrap();
    Trainer::new(cfg.train.clone()).unwrap().fit(&mut single, &data).unwrap();
    assert_eq!(e.members[0].model, single);
    for s in &data.sequences {
        assert_eq!(e.predict(&s.frames).unwrap().0, single.predict(&s.frames).unwrap());
    }
}

#[test]
fn scaling_weights_keeps_predictions() {
    let data = toy_data();
    let e = fit_ernn(&data, &config(2), Execution::Parallel).unwrap();
    assert_eq!(e.members.iter().map(|m| m.order).collect::<Vec<_>>(), vec![0, 1, 2]);
    let mut scaled = e.clone();
    for m in &mut scaled.members {
        m.weight *= 7.3;
    }
    for s in &data.sequences {
        assert_eq!(e.predict(&s.frames).unwrap().0, scaled.predict(&s.frames).unwrap().0);
    }
    assert_eq!(
        e.evaluate(&data, Execution::Parallel).unwrap(),
        e.evaluate(&data, Execution::Sequential).unwrap()
    );
}

#[test]
fn identical_members_agree_with_either() {
    let data = toy_data();
    let m = common::model("dos:1", 4, 3, 4, 8);
    let member = |w| EnsembleMember {
        order: 1,
        weight: w,
        weighted_error: 0.5,
        model: m.clone(),
    };
    let e = EnsembleModel {
        classes: 4,
        members: vec![member(0.4), member(2.5)],
    };
    for s in &data.sequences {
        assert_eq!(e.predict(&s.frames).unwrap().0, m.predict(&s.frames).unwrap());
    }
}

#[test]
fn ensemble_document_round_trip() {
    let data = toy_data();
    let e = fit_ernn(&data, &config(1), Execution::Sequential).unwrap();
    let text = ensemble_to_string(&e).unwrap();
    let back = ensemble_from_str(&text).unwrap();
    assert_eq!(back, e);
    assert!(ensemble_from_str(&text[..text.len() / 2]).is_err());
    assert!(ensemble_from_str(&text.replace("\"version\": 1,\n  \"classes\"", "\"version\": 2,\n  \"classes\"")).is_err());

    let mut bad = e.clone();
    for m in &mut bad.members {
        m.weight = 0.0;
    }
    let text = ensemble_to_string(&bad).unwrap();
    assert!(ensemble_from_str(&text).is_err());
}
