#![allow(dead_code)]

pub mod complex_step;

use d2rnn::cells::{Arch, Model, StackConfig};
use d2rnn::numerics::{Rng, Vector};

pub fn frames(rng: &mut Rng, len: usize, dim: usize) -> Vec<Vector> {
    (0..len)
        .map(|_| (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect()
}

pub fn model(arch: &str, input: usize, state: usize, classes: usize, seed: u64) -> Model {
    let arch: Arch = arch.parse().unwrap();
    Model::new(StackConfig::from_arch(arch, input, state, classes).unwrap(), seed).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
