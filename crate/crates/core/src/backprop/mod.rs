//! Reverse-mode gradients through a forward [`Tape`], in full and truncated
//! form, plus a finite-difference gradient checker.
//!
//! Truncated mode stops gradient flowing from the gates back into the DoS
//! vectors of order one and above (the errors that would re-enter the memory
//! cell through velocity and acceleration nodes). The parameter gradients of
//! the DoS matrices themselves, and every order-0 path, are kept.

mod gradcheck;
mod precise;

use serde::{Deserialize, Serialize};

pub use gradcheck::{grad_check, grad_check_against, relative_error, GradCheckEntry, GradCheckReport, FD_STEP};

use crate::cells::{CellKind, CellParams, GatedParams, GatedStep, Model, Params, RnnParams, RnnStep, StepRecord, Tape};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

/// Default pass threshold of [`grad_check`].
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    #[default]
    Full,
    Truncated,
}

impl Truncation {
    fn propagates(self, order: usize) -> bool {
        self == Truncation::Full || order == 0
    }
}

/// Gradient of a scalar loss, shaped like the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Params);

impl Gradients {
    pub fn params(&self) -> &Params {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Rescales to at most `max_norm` in Euclidean norm.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let n = self.norm();
        if n > max_norm && n > 0.0 {
            self.0.scale(max_norm / n);
        }
    }
}

pub fn backward_full(model: &Model, tape: &Tape, dlogits: &[Vector]) -> Result<Gradients> {
    backward(model, tape, dlogits, Truncation::Full)
}

pub fn backward_truncated(model: &Model, tape: &Tape, dlogits: &[Vector]) -> Result<Gradients> {
    backward(model, tape, dlogits, Truncation::Truncated)
}

/// Backpropagates `dlogits[t]` (gradient at `y_t`, post-tanh) through the
/// whole tape.
pub fn backward(model: &Model, tape: &Tape, dlogits: &[Vector], mode: Truncation) -> Result<Gradients> {
    check_tape(model, tape, dlogits)?;
    let mut grads = model.params.zeros_like();
    let top = model.config.layers.len() - 1;

    let w_yh = &model.params.output.w_yh;
    let mut dh_ext: Vec<Vector> = Vec::with_capacity(tape.len());
    for (t, (dy, y)) in dlogits.iter().zip(&tape.logits).enumerate() {
        let dz: Vector = dy.zip_with(y, |g, y| g * (1.0 - y * y));
        let h = tape.layers[top][t].h();
        grads.output.w_yh.add_outer(dz.as_slice(), h.as_slice());
        grads.output.b_y.axpy(1.0, &dz)?;
        let mut dh = vec![0.0; h.len()];
        w_yh.tr_matvec_acc(dz.as_slice(), &mut dh);
        dh_ext.push(Vector::from(dh));
    }

    for k in (0..=top).rev() {
        let records = &tape.layers[k];
        dh_ext = match (&model.params.layers[k], &mut grads.layers[k]) {
            (CellParams::Gated(p), CellParams::Gated(g)) => {
                let steps: Vec<&GatedStep> = records
                    .iter()
                    .map(|r| match r {
                        StepRecord::Gated(s) => s,
                        StepRecord::Rnn(_) => unreachable!("checked by check_tape"),
                    })
                    .collect();
                gated_backward(p, g, &steps, &dh_ext, mode)
            }
            (CellParams::Rnn(p), CellParams::Rnn(g)) => {
                let steps: Vec<&RnnStep> = records
                    .iter()
                    .map(|r| match r {
                        StepRecord::Rnn(s) => s,
                        StepRecord::Gated(_) => unreachable!("checked by check_tape"),
                    })
                    .collect();
                rnn_backward(p, g, &steps, &dh_ext)
            }
            _ => unreachable!("checked by check_tape"),
        };
    }
    Ok(Gradients(grads))
}

fn check_tape(model: &Model, tape: &Tape, dlogits: &[Vector]) -> Result<()> {
    let cfg = &model.config;
    if tape.layers.len() != cfg.layers.len() || model.params.layers.len() != cfg.layers.len() {
        return Err(Error::shape(
            "backward",
            format!("model with {} layers", cfg.layers.len()),
            format!("tape with {} layers", tape.layers.len()),
        ));
    }
    if tape.is_empty() || dlogits.len() != tape.len() {
        return Err(Error::shape(
            "backward",
            format!("tape of {} frames", tape.len()),
            format!("{} logit gradients", dlogits.len()),
        ));
    }
    for (t, d) in dlogits.iter().enumerate() {
        if d.len() != cfg.output_classes {
            return Err(Error::shape(
                "backward",
                format!("{} classes", cfg.output_classes),
                format!("frame {t} gradient len {}", d.len()),
            ));
        }
    }
    for (k, (spec, records)) in cfg.layers.iter().zip(&tape.layers).enumerate() {
        if records.len() != tape.len() {
            return Err(Error::shape(
                "backward",
                format!("{} frames", tape.len()),
                format!("layer {k} with {} records", records.len()),
            ));
        }
        for r in records {
            let ok = match (spec.kind, r) {
                (CellKind::ClassicalRnn, StepRecord::Rnn(s)) => s.h.len() == spec.state_units,
                (CellKind::Lstm, StepRecord::Gated(s)) => {
                    s.s.len() == spec.state_units && s.orders.is_empty()
                }
                (kind, StepRecord::Gated(s)) if kind.is_gated() => {
                    s.s.len() == spec.state_units && s.orders == kind.gate_orders()
                }
                _ => false,
            };
            if !ok {
                return Err(Error::shape(
                    "backward",
                    format!("layer {k} kind {} with {} units", spec.kind, spec.state_units),
                    "mismatched tape record",
                ));
            }
        }
    }
    Ok(())
}

/// `(-1)^k * C(n, k)`: weight of `s_{t-k}` in the order-`n` DoS at `t`.
fn dos_coefficient(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for j in 0..k {
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    if k % 2 == 1 {
        -c
    } else {
        c
    }
}

fn add_assign(dst: &mut Vector, src: &Vector, scale: f64) {
    for (a, b) in dst.as_mut_slice().iter_mut().zip(src.iter()) {
        *a += scale * b;
    }
}

fn tr_acc(w: &Matrix, v: &Vector, out: &mut Vector) {
    w.tr_matvec_acc(v.as_slice(), out.as_mut_slice());
}

/// Spreads the gradient at the order-`n` DoS of `s_{t_end}` onto the states
/// it was built from (`s_{t_end - k}`, `k = 0..=n`, ignoring padded states).
fn scatter_dos(ds: &mut [Vector], t_end: usize, n: usize, grad: &Vector) {
    for k in 0..=n.min(t_end) {
        add_assign(&mut ds[t_end - k], grad, dos_coefficient(n, k));
    }
}

/// Returns the gradient with respect to each step's input.
fn gated_backward(
    p: &GatedParams,
    g: &mut GatedParams,
    steps: &[&GatedStep],
    dh_ext: &[Vector],
    mode: Truncation,
) -> Vec<Vector> {
    let units = p.state_units();
    let len = steps.len();
    let mut ds = vec![Vector::zeros(units); len];
    let mut dx = vec![Vector::zeros(p.input_units()); len];
    let mut dh_carry = Vector::zeros(units);
    let tied = p.tied_hidden;

    for t in (0..len).rev() {
        let r = steps[t];
        let mut dh = dh_ext[t].clone();
        add_assign(&mut dh, &dh_carry, 1.0);

        // h = o * tanh(s)
        let mut dpre_o = Vector::zeros(units);
        for u in 0..units {
            let d_o = dh[u] * r.tanh_s[u];
            dpre_o[u] = d_o * r.o[u] * (1.0 - r.o[u]);
            ds[t][u] += dh[u] * r.o[u] * (1.0 - r.tanh_s[u] * r.tanh_s[u]);
        }

        g.w_ox.add_outer(dpre_o.as_slice(), r.x.as_slice());
        let w_oh_grad = if tied { &mut g.w_ih } else { &mut g.w_oh };
        w_oh_grad.add_outer(dpre_o.as_slice(), r.h_prev.as_slice());
        add_assign(&mut g.b_o, &dpre_o, 1.0);
        for (j, &n) in r.orders.iter().enumerate() {
            let gw = g.dos_for_mut(n).expect("orders match params");
            gw.w_od.add_outer(dpre_o.as_slice(), r.dos_cur[j].as_slice());
            if mode.propagates(n) {
                let mut d_dos = Vector::zeros(units);
                tr_acc(&p.dos_for(n).expect("orders match params").w_od, &dpre_o, &mut d_dos);
                scatter_dos(&mut ds, t, n, &d_dos);
            }
        }

        // s = f * s_prev + i * g; every consumer of s_t sits at or after t.
        let d_s = ds[t].clone();
        let mut dpre_i = Vector::zeros(units);
        let mut dpre_f = Vector::zeros(units);
        let mut dpre_g = Vector::zeros(units);
        for u in 0..units {
            dpre_f[u] = d_s[u] * r.s_prev[u] * r.f[u] * (1.0 - r.f[u]);
            dpre_i[u] = d_s[u] * r.g[u] * r.i[u] * (1.0 - r.i[u]);
            dpre_g[u] = d_s[u] * r.i[u] * (1.0 - r.g[u] * r.g[u]);
        }
        if t > 0 {
            let carry = d_s.zip_with(&r.f, |a, b| a * b);
            add_assign(&mut ds[t - 1], &carry, 1.0);
        }

        g.w_ix.add_outer(dpre_i.as_slice(), r.x.as_slice());
        g.w_fx.add_outer(dpre_f.as_slice(), r.x.as_slice());
        g.w_sx.add_outer(dpre_g.as_slice(), r.x.as_slice());
        g.w_ih.add_outer(dpre_i.as_slice(), r.h_prev.as_slice());
        let w_fh_grad = if tied { &mut g.w_ih } else { &mut g.w_fh };
        w_fh_grad.add_outer(dpre_f.as_slice(), r.h_prev.as_slice());
        g.w_sh.add_outer(dpre_g.as_slice(), r.h_prev.as_slice());
        add_assign(&mut g.b_i, &dpre_i, 1.0);
        add_assign(&mut g.b_f, &dpre_f, 1.0);
        add_assign(&mut g.b_s, &dpre_g, 1.0);

        for (j, &n) in r.orders.iter().enumerate() {
            let gw = g.dos_for_mut(n).expect("orders match params");
            gw.w_id.add_outer(dpre_i.as_slice(), r.dos_prev[j].as_slice());
            gw.w_fd.add_outer(dpre_f.as_slice(), r.dos_prev[j].as_slice());
            if mode.propagates(n) && t > 0 {
                let w = p.dos_for(n).expect("orders match params");
                let mut d_dos = Vector::zeros(units);
                tr_acc(&w.w_id, &dpre_i, &mut d_dos);
                tr_acc(&w.w_fd, &dpre_f, &mut d_dos);
                scatter_dos(&mut ds, t - 1, n, &d_dos);
            }
        }

        let mut carry = Vector::zeros(units);
        tr_acc(&p.w_ih, &dpre_i, &mut carry);
        tr_acc(p.forget_hidden(), &dpre_f, &mut carry);
        tr_acc(p.output_hidden(), &dpre_o, &mut carry);
        tr_acc(&p.w_sh, &dpre_g, &mut carry);
        dh_carry = carry;

        let dxt = &mut dx[t];
        tr_acc(&p.w_ix, &dpre_i, dxt);
        tr_acc(&p.w_fx, &dpre_f, dxt);
        tr_acc(&p.w_ox, &dpre_o, dxt);
        tr_acc(&p.w_sx, &dpre_g, dxt);
    }
    dx
}

fn rnn_backward(p: &RnnParams, g: &mut RnnParams, steps: &[&RnnStep], dh_ext: &[Vector]) -> Vec<Vector> {
    let units = p.state_units();
    let mut dx = vec![Vector::zeros(p.input_units()); steps.len()];
    let mut carry = Vector::zeros(units);
    for t in (0..steps.len()).rev() {
        let r = steps[t];
        let mut dpre = dh_ext[t].clone();
        add_assign(&mut dpre, &carry, 1.0);
        for u in 0..units {
            dpre[u] *= 1.0 - r.h[u] * r.h[u];
        }
        g.w_hx.add_outer(dpre.as_slice(), r.x.as_slice());
        g.w_hh.add_outer(dpre.as_slice(), r.h_prev.as_slice());
        add_assign(&mut g.b_h, &dpre, 1.0);
        let mut next = Vector::zeros(units);
        tr_acc(&p.w_hh, &dpre, &mut next);
        carry = next;
        tr_acc(&p.w_hx, &dpre, &mut dx[t]);
    }
    dx
}
