//! The training loss re-evaluated in double-double arithmetic, so that
//! central differences resolve gradients far below `f64` round-off of the
//! loss itself.

use std::collections::HashMap;

use crate::cells::{CellKind, Model};
use crate::numerics::{Dd, Vector};
use crate::train::Target;

/// Every parameter tensor of a model as double-double values, addressed by
/// the names of [`crate::cells::Params::tensors`].
pub(crate) struct DdParams {
    values: Vec<Vec<Dd>>,
    index: HashMap<String, usize>,
}

impl DdParams {
    pub(crate) fn new(model: &Model) -> Self {
        let tensors = model.params.tensors();
        DdParams {
            values: tensors
                .iter()
                .map(|(_, t)| t.iter().map(|&v| Dd::from(v)).collect())
                .collect(),
            index: tensors
                .iter()
                .enumerate()
                .map(|(i, (n, _))| (n.clone(), i))
                .collect(),
        }
    }

    pub(crate) fn set(&mut self, tensor: usize, i: usize, value: Dd) {
        self.values[tensor][i] = value;
    }

    pub(crate) fn get(&self, tensor: usize, i: usize) -> Dd {
        self.values[tensor][i]
    }

    fn tensor(&self, name: &str) -> &[Dd] {
        &self.values[self.index[name]]
    }

    fn matvec(&self, name: &str, x: &[Dd]) -> Vec<Dd> {
        let m = self.tensor(name);
        let cols = x.len();
        m.chunks(cols)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

fn sum_into(acc: &mut [Dd], v: &[Dd]) {
    acc.iter_mut().zip(v).for_each(|(a, &b)| *a = *a + b);
}

fn dos(n: usize, current: &[Dd], lagged: &[Vec<Dd>]) -> Vec<Dd> {
    let mut window: Vec<Vec<Dd>> = vec![current.to_vec()];
    for j in 0..n {
        window.push(lagged.get(j).cloned().unwrap_or_else(|| vec![Dd::ZERO; current.len()]));
    }
    for _ in 0..n {
        for i in 0..window.len() - 1 {
            let next = window[i + 1].clone();
            window[i].iter_mut().zip(&next).for_each(|(a, &b)| *a = *a - b);
        }
        window.pop();
    }
    window.swap_remove(0)
}

/// Loss of `model` on `frames` with parameters taken from `p`. Shapes and
/// labels are assumed to have been validated by an `f64` forward pass.
pub(crate) fn loss(model: &Model, p: &DdParams, frames: &[Vector], target: &Target) -> Dd {
    let mut seq: Vec<Vec<Dd>> = frames
        .iter()
        .map(|f| f.iter().map(|&v| Dd::from(v)).collect())
        .collect();
    for (k, spec) in model.config.layers.iter().enumerate() {
        let name = |s: &str| format!("layer{k}.{s}");
        let units = spec.state_units;
        let mut h = vec![Dd::ZERO; units];
        let mut out = Vec::with_capacity(seq.len());
        if spec.kind == CellKind::ClassicalRnn {
            for x in &seq {
                let mut a = p.matvec(&name("w_hx"), x);
                sum_into(&mut a, &p.matvec(&name("w_hh"), &h));
                sum_into(&mut a, p.tensor(&name("b_h")));
                h = a.into_iter().map(Dd::tanh).collect();
                out.push(h.clone());
            }
            seq = out;
            continue;
        }
        let tied = model.params.layers[k].as_gated().is_some_and(|g| g.tied_hidden);
        let (fh, oh) = if tied { ("w_ih", "w_ih") } else { ("w_fh", "w_oh") };
        let orders = spec.kind.gate_orders();
        let mut s = vec![Dd::ZERO; units];
        let mut lagged: Vec<Vec<Dd>> = Vec::new();
        for x in &seq {
            let gate = |wx: &str, wh: &str, b: &str, dname: &str, ds: &[Vec<Dd>]| -> Vec<Dd> {
                let mut a = p.matvec(&name(wx), x);
                sum_into(&mut a, &p.matvec(&name(wh), &h));
                sum_into(&mut a, p.tensor(&name(b)));
                for (&n, d) in orders.iter().zip(ds) {
                    sum_into(&mut a, &p.matvec(&name(&format!("{dname}{n}")), d));
                }
                a
            };
            let dos_prev: Vec<Vec<Dd>> = orders.iter().map(|&n| dos(n, &s, &lagged)).collect();
            let i: Vec<Dd> = gate("w_ix", "w_ih", "b_i", "w_id", &dos_prev).into_iter().map(Dd::sigmoid).collect();
            let f: Vec<Dd> = gate("w_fx", fh, "b_f", "w_fd", &dos_prev).into_iter().map(Dd::sigmoid).collect();
            let g: Vec<Dd> = gate("w_sx", "w_sh", "b_s", "", &[]).into_iter().map(Dd::tanh).collect();
            let s_new: Vec<Dd> = (0..units).map(|u| f[u] * s[u] + i[u] * g[u]).collect();
            lagged.insert(0, std::mem::replace(&mut s, s_new));
            lagged.truncate(spec.kind.max_order().max(1));
            let dos_cur: Vec<Vec<Dd>> = orders.iter().map(|&n| dos(n, &s, &lagged)).collect();
            let o: Vec<Dd> = gate("w_ox", oh, "b_o", "w_od", &dos_cur).into_iter().map(Dd::sigmoid).collect();
            h = (0..units).map(|u| o[u] * s[u].tanh()).collect();
            out.push(h.clone());
        }
        seq = out;
    }

    let frame_loss = |h: &[Dd], c: usize| -> Dd {
        let mut y = p.matvec("output.w_yh", h);
        sum_into(&mut y, p.tensor("output.b_y"));
        let y: Vec<Dd> = y.into_iter().map(Dd::tanh).collect();
        let m = y.iter().map(|v| v.hi).fold(f64::NEG_INFINITY, f64::max);
        let lse = Dd::from(m) + y.iter().map(|&v| (v - Dd::from(m)).exp()).sum::<Dd>().ln();
        lse - y[c]
    };
    match target {
        Target::Sequence(c) => frame_loss(seq.last().expect("non-empty sequence"), *c),
        Target::Frames(labels) => seq.iter().zip(labels).map(|(h, &c)| frame_loss(h, c)).sum(),
    }
}
