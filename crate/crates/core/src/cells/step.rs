use std::collections::VecDeque;

use super::config::CellKind;
use super::params::{CellParams, DosWeights, GatedParams, RnnParams};
use crate::error::{Error, Result};
use crate::numerics::{sigmoid_scalar, Matrix, Vector};

/// Recurrent state of one layer between time steps.
///
/// `history[j]` is the internal state `j + 1` steps before `s`. States before
/// the first frame are zero, so missing history entries read as zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub s: Vector,
    pub h: Vector,
    pub history: VecDeque<Vector>,
    capacity: usize,
}

impl LayerState {
    pub fn new(state_units: usize, max_order: usize) -> Self {
        LayerState {
            s: Vector::zeros(state_units),
            h: Vector::zeros(state_units),
            history: VecDeque::with_capacity(max_order),
            capacity: max_order,
        }
    }

    /// Longest history this state keeps.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn advance(&self, s: Vector, h: Vector) -> LayerState {
        let mut history = self.history.clone();
        if self.capacity > 0 {
            history.push_front(self.s.clone());
            history.truncate(self.capacity);
        }
        LayerState {
            s,
            h,
            history,
            capacity: self.capacity,
        }
    }
}

/// Finite-difference derivative of order `order` at `current`.
///
/// `lagged[j]` is the state `j + 1` steps earlier; absent entries are zero.
/// Order 1 is `s_t - s_{t-1}`, order 2 `v_t - v_{t-1}`, and higher orders
/// keep differencing.
pub fn dos(order: usize, current: &Vector, lagged: &[&Vector]) -> Vector {
    let n = current.len();
    let mut window: Vec<Vector> = Vec::with_capacity(order + 1);
    window.push(current.clone());
    for j in 0..order {
        window.push(lagged.get(j).map_or_else(|| Vector::zeros(n), |v| (*v).clone()));
    }
    for _ in 0..order {
        for i in 0..window.len() - 1 {
            let next = window[i + 1].clone();
            for (a, b) in window[i].as_mut_slice().iter_mut().zip(next.iter()) {
                *a -= b;
            }
        }
        window.pop();
    }
    window.swap_remove(0)
}

/// Forward intermediates of one gated step.
#[derive(Clone, Debug, PartialEq)]
pub struct GatedStep {
    pub x: Vector,
    pub h_prev: Vector,
    pub s_prev: Vector,
    /// DoS orders feeding the gates, aligned with `dos_prev`/`dos_cur`.
    pub orders: Vec<usize>,
    /// DoS of `s_{t-1}`, seen by the input and forget gates.
    pub dos_prev: Vec<Vector>,
    /// DoS of `s_t`, seen by the output gate.
    pub dos_cur: Vec<Vector>,
    pub pre_i: Vector,
    pub pre_f: Vector,
    pub pre_o: Vector,
    pub pre_g: Vector,
    pub i: Vector,
    pub f: Vector,
    pub o: Vector,
    pub g: Vector,
    pub s: Vector,
    pub tanh_s: Vector,
    pub h: Vector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RnnStep {
    pub x: Vector,
    pub h_prev: Vector,
    pub pre: Vector,
    pub h: Vector,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepRecord {
    Rnn(RnnStep),
    Gated(GatedStep),
}

impl StepRecord {
    /// Internal state; the hidden state for classical RNN layers.
    pub fn s(&self) -> &Vector {
        match self {
            StepRecord::Rnn(r) => &r.h,
            StepRecord::Gated(g) => &g.s,
        }
    }

    pub fn h(&self) -> &Vector {
        match self {
            StepRecord::Rnn(r) => &r.h,
            StepRecord::Gated(g) => &g.h,
        }
    }

    pub fn x(&self) -> &Vector {
        match self {
            StepRecord::Rnn(r) => &r.x,
            StepRecord::Gated(g) => &g.x,
        }
    }
}

/// `W_x x + W_h h + b + Σ W_d d`, accumulated in that order.
fn preactivation(
    wx: &Matrix,
    x: &Vector,
    wh: &Matrix,
    h: &Vector,
    b: &Vector,
    dos_terms: &[(&Matrix, &Vector)],
) -> Vector {
    let mut acc = wx.matvec_unchecked(x.as_slice());
    let hh = wh.matvec_unchecked(h.as_slice());
    for ((a, u), c) in acc.as_mut_slice().iter_mut().zip(hh.iter()).zip(b.iter()) {
        *a = *a + u + c;
    }
    for (w, d) in dos_terms {
        let dd = w.matvec_unchecked(d.as_slice());
        for (a, u) in acc.as_mut_slice().iter_mut().zip(dd.iter()) {
            *a += u;
        }
    }
    acc
}

fn check_step_shapes(input: usize, units: usize, state: &LayerState, x: &Vector) -> Result<()> {
    if x.len() != input {
        return Err(Error::shape(
            "cell step",
            format!("input units {input}"),
            format!("x len {}", x.len()),
        ));
    }
    if state.s.len() != units || state.h.len() != units {
        return Err(Error::shape(
            "cell step",
            format!("state units {units}"),
            format!("state len {}/{}", state.s.len(), state.h.len()),
        ));
    }
    Ok(())
}

fn gated_step(
    p: &GatedParams,
    state: &LayerState,
    x: &Vector,
    terms: &[&DosWeights],
) -> Result<(LayerState, GatedStep)> {
    check_step_shapes(p.input_units(), p.state_units(), state, x)?;
    if let Some(max) = terms.iter().map(|t| t.order).max() {
        if state.capacity() < max {
            return Err(Error::Invalid(format!(
                "layer state keeps {} lagged states, order {max} needs {max}",
                state.capacity()
            )));
        }
    }

    let history: Vec<&Vector> = state.history.iter().collect();
    let orders: Vec<usize> = terms.iter().map(|t| t.order).collect();
    let dos_prev: Vec<Vector> = orders
        .iter()
        .map(|&n| dos(n, &state.s, &history))
        .collect();

    let h = &state.h;
    let i_terms: Vec<(&Matrix, &Vector)> = terms.iter().map(|t| &t.w_id).zip(&dos_prev).collect();
    let f_terms: Vec<(&Matrix, &Vector)> = terms.iter().map(|t| &t.w_fd).zip(&dos_prev).collect();
    let pre_i = preactivation(&p.w_ix, x, &p.w_ih, h, &p.b_i, &i_terms);
    let pre_f = preactivation(&p.w_fx, x, p.forget_hidden(), h, &p.b_f, &f_terms);
    let i = pre_i.map(sigmoid_scalar);
    let f = pre_f.map(sigmoid_scalar);

    let pre_g = preactivation(&p.w_sx, x, &p.w_sh, h, &p.b_s, &[]);
    let g = pre_g.map(f64::tanh);
    let s: Vector = (0..state.s.len())
        .map(|k| f[k] * state.s[k] + i[k] * g[k])
        .collect();

    let mut lagged = Vec::with_capacity(history.len() + 1);
    lagged.push(&state.s);
    lagged.extend(history.iter().copied());
    let dos_cur: Vec<Vector> = orders.iter().map(|&n| dos(n, &s, &lagged)).collect();

    let o_terms: Vec<(&Matrix, &Vector)> = terms.iter().map(|t| &t.w_od).zip(&dos_cur).collect();
    let pre_o = preactivation(&p.w_ox, x, p.output_hidden(), h, &p.b_o, &o_terms);
    let o = pre_o.map(sigmoid_scalar);
    let tanh_s = s.map(f64::tanh);
    let h_new = o.zip_with(&tanh_s, |a, b| a * b);

    let next = state.advance(s.clone(), h_new.clone());
    let record = GatedStep {
        x: x.clone(),
        h_prev: state.h.clone(),
        s_prev: state.s.clone(),
        orders,
        dos_prev,
        dos_cur,
        pre_i,
        pre_f,
        pre_o,
        pre_g,
        i,
        f,
        o,
        g,
        s,
        tanh_s,
        h: h_new,
    };
    Ok((next, record))
}

/// Conventional LSTM update; DoS weights in `p`, if any, are ignored.
pub fn lstm_step(p: &GatedParams, state: &LayerState, x: &Vector) -> Result<(LayerState, GatedStep)> {
    gated_step(p, state, x, &[])
}

/// LSTM update with every gate modulated by the single DoS order `order`.
pub fn dos_cell_step(
    p: &GatedParams,
    state: &LayerState,
    x: &Vector,
    order: usize,
) -> Result<(LayerState, GatedStep)> {
    let w = p
        .dos_for(order)
        .ok_or_else(|| Error::Invalid(format!("cell has no DoS weights for order {order}")))?;
    gated_step(p, state, x, &[w])
}

/// LSTM update with gates summing DoS orders `0..=max_order`.
pub fn drnn_cell_step(
    p: &GatedParams,
    state: &LayerState,
    x: &Vector,
    max_order: usize,
) -> Result<(LayerState, GatedStep)> {
    let terms = (0..=max_order)
        .map(|n| {
            p.dos_for(n)
                .ok_or_else(|| Error::Invalid(format!("cell has no DoS weights for order {n}")))
        })
        .collect::<Result<Vec<_>>>()?;
    gated_step(p, state, x, &terms)
}

/// `h_t = tanh(W_hh h_{t-1} + W_hx x_t + b_h)`.
pub fn rnn_step(p: &RnnParams, state: &LayerState, x: &Vector) -> Result<(LayerState, RnnStep)> {
    check_step_shapes(p.input_units(), p.state_units(), state, x)?;
    let pre = preactivation(&p.w_hx, x, &p.w_hh, &state.h, &p.b_h, &[]);
    let h = pre.map(f64::tanh);
    let next = state.advance(h.clone(), h.clone());
    Ok((
        next,
        RnnStep {
            x: x.clone(),
            h_prev: state.h.clone(),
            pre,
            h,
        },
    ))
}

/// Advances one layer of the given kind by one frame.
pub fn step(
    kind: CellKind,
    params: &CellParams,
    state: &LayerState,
    x: &Vector,
) -> Result<(LayerState, StepRecord)> {
    match (kind, params) {
        (CellKind::ClassicalRnn, CellParams::Rnn(p)) => {
            rnn_step(p, state, x).map(|(s, r)| (s, StepRecord::Rnn(r)))
        }
        (CellKind::Lstm, CellParams::Gated(p)) => {
            lstm_step(p, state, x).map(|(s, r)| (s, StepRecord::Gated(r)))
        }
        (CellKind::Dos { order }, CellParams::Gated(p)) => {
            dos_cell_step(p, state, x, order).map(|(s, r)| (s, StepRecord::Gated(r)))
        }
        (CellKind::Drnn { max_order }, CellParams::Gated(p)) => {
            drnn_cell_step(p, state, x, max_order).map(|(s, r)| (s, StepRecord::Gated(r)))
        }
        (k, _) => Err(Error::Invalid(format!("parameters do not match cell kind {k}"))),
    }
}
