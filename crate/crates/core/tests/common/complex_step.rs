//! Complex-step reference gradients for gated stacks.

use std::collections::HashMap;

use d2rnn::cells::{CellParams, Model, Params, StepRecord, Tape};
use d2rnn::numerics::Vector;
use num_complex::Complex64 as C;

pub const STEP: f64 = 1e-30;

struct CxParams<'a> {
    model: &'a Model,
    values: HashMap<String, Vec<C>>,
}

impl<'a> CxParams<'a> {
    fn new(model: &'a Model, bump: Option<(&str, usize)>) -> Self {
        let mut values = HashMap::new();
        for (name, t) in model.params.tensors() {
            let mut v: Vec<C> = t.iter().map(|&x| C::new(x, 0.0)).collect();
            if let Some((n, i)) = bump {
                if n == name {
                    v[i].im = STEP;
                }
            }
            values.insert(name, v);
        }
        CxParams { model, values }
    }

    fn mv(&self, name: &str, x: &[C]) -> Vec<C> {
        let m = &self.values[name];
        let cols = x.len();
        (0..m.len() / cols)
            .map(|r| (0..cols).map(|c| m[r * cols + c] * x[c]).sum())
            .collect()
    }
}

fn sigmoid(z: C) -> C {
    C::new(1.0, 0.0) / (C::new(1.0, 0.0) + (-z).exp())
}

fn dos_c(n: usize, hist: &[Vec<C>]) -> Vec<C> {
    // hist holds s_0 = 0, s_1, ..., newest last.
    let t = hist.len() - 1;
    let units = hist[0].len();
    let mut out = vec![C::new(0.0, 0.0); units];
    let mut coef = 1.0;
    for k in 0..=n {
        if k <= t {
            for u in 0..units {
                out[u] += hist[t - k][u] * coef;
            }
        }
        coef = -coef * (n - k) as f64 / (k + 1) as f64;
    }
    out
}

/// Sequence loss with every parameter complexified. When `tape` is given,
/// DoS vectors of order >= 1 are replaced by the constants it recorded.
fn cx_loss(p: &CxParams, xs: &[Vector], class: usize, frozen: Option<&Tape>) -> C {
    let m = p.model;
    let mut seq: Vec<Vec<C>> = xs
        .iter()
        .map(|v| v.iter().map(|&x| C::new(x, 0.0)).collect())
        .collect();
    for (k, spec) in m.config.layers.iter().enumerate() {
        assert!(matches!(m.params.layers[k], CellParams::Gated(_)));
        let units = spec.state_units;
        let orders = spec.kind.gate_orders();
        let name = |s: &str| format!("layer{k}.{s}");
        let add = |parts: Vec<Vec<C>>| -> Vec<C> {
            (0..units).map(|u| parts.iter().map(|v| v[u]).sum()).collect()
        };
        let mut hist = vec![vec![C::new(0.0, 0.0); units]];
        let mut h = vec![C::new(0.0, 0.0); units];
        let mut out = Vec::new();
        for (t, x) in seq.iter().enumerate() {
            let rec = frozen.map(|tape| match &tape.layers[k][t] {
                StepRecord::Gated(g) => g.clone(),
                StepRecord::Rnn(_) => unreachable!(),
            });
            let dos_at = |idx: usize, n: usize, cur: bool, hist: &[Vec<C>]| -> Vec<C> {
                match (&rec, n) {
                    (Some(r), n) if n >= 1 => {
                        let v = if cur { &r.dos_cur[idx] } else { &r.dos_prev[idx] };
                        v.iter().map(|&a| C::new(a, 0.0)).collect()
                    }
                    _ => dos_c(n, hist),
                }
            };
            let gate = |g: &str, dos_name: &str, cur: bool, hist: &[Vec<C>]| -> Vec<C> {
                let mut parts = vec![
                    p.mv(&name(&format!("w_{g}x")), x),
                    p.mv(&name(&format!("w_{g}h")), &h),
                    p.values[&name(&format!("b_{g}"))].clone(),
                ];
                for (idx, &n) in orders.iter().enumerate() {
                    let d = dos_at(idx, n, cur, hist);
                    parts.push(p.mv(&name(&format!("{dos_name}{n}")), &d));
                }
                add(parts)
            };
            let i: Vec<C> = gate("i", "w_id", false, &hist).into_iter().map(sigmoid).collect();
            let f: Vec<C> = gate("f", "w_fd", false, &hist).into_iter().map(sigmoid).collect();
            let g: Vec<C> = add(vec![
                p.mv(&name("w_sx"), x),
                p.mv(&name("w_sh"), &h),
                p.values[&name("b_s")].clone(),
            ])
            .into_iter()
            .map(|z| z.tanh())
            .collect();
            let prev = hist.last().unwrap().clone();
            let s: Vec<C> = (0..units).map(|u| f[u] * prev[u] + i[u] * g[u]).collect();
            hist.push(s.clone());
            let o: Vec<C> = gate("o", "w_od", true, &hist).into_iter().map(sigmoid).collect();
            h = (0..units).map(|u| o[u] * s[u].tanh()).collect();
            out.push(h.clone());
        }
        seq = out;
    }
    let top = seq.last().unwrap();
    let y: Vec<C> = p
        .mv("output.w_yh", top)
        .iter()
        .zip(&p.values["output.b_y"])
        .map(|(a, b)| (a + b).tanh())
        .collect();
    let lse = y.iter().map(|v| v.exp()).sum::<C>().ln();
    lse - y[class]
}

/// Largest `|a - c| / max(|c|, 1)` over every coordinate of `analytic`,
/// where `c` is the complex-step derivative, with the offending entry.
pub fn complex_step_error(m: &Model, xs: &[Vector], class: usize, analytic: &Params, frozen: Option<&Tape>) -> (f64, String) {
    let mut worst = (0.0, String::new());
    for (name, g) in analytic.tensors() {
        for (i, &a) in g.iter().enumerate() {
            let p = CxParams::new(m, Some((&name, i)));
            let c = cx_loss(&p, xs, class, frozen).im / STEP;
            let err = (a - c).abs() / c.abs().max(1.0);
            if err >= worst.0 {
                worst = (err, format!("{name}[{i}]: analytic {a} vs complex-step {c}"));
            }
        }
    }
    worst
}
