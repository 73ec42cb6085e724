use serde::{Deserialize, Serialize};

use super::config::{CellKind, StackConfig};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng, Vector};

/// DoS mapping matrices for one order (`state x state`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DosWeights {
    pub order: usize,
    pub w_id: Matrix,
    pub w_fd: Matrix,
    pub w_od: Matrix,
}

/// Parameters of an LSTM-family layer.
///
/// `*x` matrices are `state x input`, `*h` and DoS matrices `state x state`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatedParams {
    pub w_ix: Matrix,
    pub w_fx: Matrix,
    pub w_ox: Matrix,
    pub w_sx: Matrix,
    pub w_ih: Matrix,
    pub w_fh: Matrix,
    pub w_oh: Matrix,
    pub w_sh: Matrix,
    pub dos: Vec<DosWeights>,
    pub b_i: Vector,
    pub b_f: Vector,
    pub b_o: Vector,
    pub b_s: Vector,
    #[serde(default)]
    pub tied_hidden: bool,
}

/// Parameters of a classical tanh RNN layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnnParams {
    pub w_hx: Matrix,
    pub w_hh: Matrix,
    pub b_h: Vector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cell", rename_all = "snake_case")]
pub enum CellParams {
    Rnn(RnnParams),
    Gated(GatedParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputParams {
    pub w_yh: Matrix,
    pub b_y: Vector,
}

/// Every trainable tensor of a stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub layers: Vec<CellParams>,
    pub output: OutputParams,
}

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let r = 1.0 / (cols as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.uniform(-r, r)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized by construction")
}

impl GatedParams {
    pub fn zeros(input: usize, state: usize, orders: &[usize]) -> Self {
        let mx = || Matrix::zeros(state, input);
        let mh = || Matrix::zeros(state, state);
        GatedParams {
            w_ix: mx(),
            w_fx: mx(),
            w_ox: mx(),
            w_sx: mx(),
            w_ih: mh(),
            w_fh: mh(),
            w_oh: mh(),
            w_sh: mh(),
            dos: orders
                .iter()
                .map(|&order| DosWeights {
                    order,
                    w_id: mh(),
                    w_fd: mh(),
                    w_od: mh(),
                })
                .collect(),
            b_i: Vector::zeros(state),
            b_f: Vector::zeros(state),
            b_o: Vector::zeros(state),
            b_s: Vector::zeros(state),
            tied_hidden: false,
        }
    }

    /// Uniform `[-1/sqrt(cols), 1/sqrt(cols)]` weights, zero biases except
    /// the forget gate at `+1`.
    pub fn random(input: usize, state: usize, orders: &[usize], rng: &mut Rng) -> Self {
        let mut p = GatedParams::zeros(input, state, orders);
        for (_, m) in p.matrices_mut() {
            let (r, c) = m.shape();
            *m = random_matrix(r, c, rng);
        }
        p.b_f = Vector::filled(state, 1.0);
        p
    }

    pub fn state_units(&self) -> usize {
        self.w_ix.rows()
    }

    pub fn input_units(&self) -> usize {
        self.w_ix.cols()
    }

    pub fn dos_for(&self, order: usize) -> Option<&DosWeights> {
        self.dos.iter().find(|d| d.order == order)
    }

    pub fn dos_for_mut(&mut self, order: usize) -> Option<&mut DosWeights> {
        self.dos.iter_mut().find(|d| d.order == order)
    }

    /// Hidden-state matrices actually used by the forget and output gates.
    pub(crate) fn forget_hidden(&self) -> &Matrix {
        if self.tied_hidden {
            &self.w_ih
        } else {
            &self.w_fh
        }
    }

    pub(crate) fn output_hidden(&self) -> &Matrix {
        if self.tied_hidden {
            &self.w_ih
        } else {
            &self.w_oh
        }
    }

    fn matrices_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out: Vec<(String, &mut Matrix)> = vec![
            ("w_ix".into(), &mut self.w_ix),
            ("w_fx".into(), &mut self.w_fx),
            ("w_ox".into(), &mut self.w_ox),
            ("w_sx".into(), &mut self.w_sx),
            ("w_ih".into(), &mut self.w_ih),
            ("w_fh".into(), &mut self.w_fh),
            ("w_oh".into(), &mut self.w_oh),
            ("w_sh".into(), &mut self.w_sh),
        ];
        for d in &mut self.dos {
            let n = d.order;
            out.push((format!("w_id{n}"), &mut d.w_id));
            out.push((format!("w_fd{n}"), &mut d.w_fd));
            out.push((format!("w_od{n}"), &mut d.w_od));
        }
        out
    }
}

impl RnnParams {
    pub fn zeros(input: usize, state: usize) -> Self {
        RnnParams {
            w_hx: Matrix::zeros(state, input),
            w_hh: Matrix::zeros(state, state),
            b_h: Vector::zeros(state),
        }
    }

    pub fn random(input: usize, state: usize, rng: &mut Rng) -> Self {
        RnnParams {
            w_hx: random_matrix(state, input, rng),
            w_hh: random_matrix(state, state, rng),
            b_h: Vector::zeros(state),
        }
    }

    pub fn state_units(&self) -> usize {
        self.w_hh.rows()
    }

    pub fn input_units(&self) -> usize {
        self.w_hx.cols()
    }
}

impl CellParams {
    pub fn zeros(kind: CellKind, input: usize, state: usize) -> Self {
        match kind {
            CellKind::ClassicalRnn => CellParams::Rnn(RnnParams::zeros(input, state)),
            k => CellParams::Gated(GatedParams::zeros(input, state, &k.gate_orders())),
        }
    }

    pub fn random(kind: CellKind, input: usize, state: usize, rng: &mut Rng) -> Self {
        match kind {
            CellKind::ClassicalRnn => CellParams::Rnn(RnnParams::random(input, state, rng)),
            k => CellParams::Gated(GatedParams::random(input, state, &k.gate_orders(), rng)),
        }
    }

    pub fn state_units(&self) -> usize {
        match self {
            CellParams::Rnn(p) => p.state_units(),
            CellParams::Gated(p) => p.state_units(),
        }
    }

    pub fn input_units(&self) -> usize {
        match self {
            CellParams::Rnn(p) => p.input_units(),
            CellParams::Gated(p) => p.input_units(),
        }
    }

    fn matrix_shapes(&self) -> Vec<(usize, usize)> {
        match self {
            CellParams::Rnn(p) => vec![p.w_hx.shape(), p.w_hh.shape()],
            CellParams::Gated(p) => {
                let mut v = vec![
                    p.w_ix.shape(),
                    p.w_fx.shape(),
                    p.w_ox.shape(),
                    p.w_sx.shape(),
                    p.w_ih.shape(),
                    p.w_fh.shape(),
                    p.w_oh.shape(),
                    p.w_sh.shape(),
                ];
                for d in &p.dos {
                    v.extend([d.w_id.shape(), d.w_fd.shape(), d.w_od.shape()]);
                }
                v
            }
        }
    }

    pub fn as_gated(&self) -> Option<&GatedParams> {
        match self {
            CellParams::Gated(p) => Some(p),
            CellParams::Rnn(_) => None,
        }
    }

    pub fn as_gated_mut(&mut self) -> Option<&mut GatedParams> {
        match self {
            CellParams::Gated(p) => Some(p),
            CellParams::Rnn(_) => None,
        }
    }

    fn tensors(&self) -> Vec<(String, &[f64])> {
        match self {
            CellParams::Rnn(p) => vec![
                ("w_hx".into(), p.w_hx.as_slice()),
                ("w_hh".into(), p.w_hh.as_slice()),
                ("b_h".into(), p.b_h.as_slice()),
            ],
            CellParams::Gated(p) => {
                let mut out: Vec<(String, &[f64])> = vec![
                    ("w_ix".into(), p.w_ix.as_slice()),
                    ("w_fx".into(), p.w_fx.as_slice()),
                    ("w_ox".into(), p.w_ox.as_slice()),
                    ("w_sx".into(), p.w_sx.as_slice()),
                    ("w_ih".into(), p.w_ih.as_slice()),
                    ("w_fh".into(), p.w_fh.as_slice()),
                    ("w_oh".into(), p.w_oh.as_slice()),
                    ("w_sh".into(), p.w_sh.as_slice()),
                ];
                for d in &p.dos {
                    let n = d.order;
                    out.push((format!("w_id{n}"), d.w_id.as_slice()));
                    out.push((format!("w_fd{n}"), d.w_fd.as_slice()));
                    out.push((format!("w_od{n}"), d.w_od.as_slice()));
                }
                out.push(("b_i".into(), p.b_i.as_slice()));
                out.push(("b_f".into(), p.b_f.as_slice()));
                out.push(("b_o".into(), p.b_o.as_slice()));
                out.push(("b_s".into(), p.b_s.as_slice()));
                out
            }
        }
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        match self {
            CellParams::Rnn(p) => vec![
                ("w_hx".into(), p.w_hx.as_mut_slice()),
                ("w_hh".into(), p.w_hh.as_mut_slice()),
                ("b_h".into(), p.b_h.as_mut_slice()),
            ],
            CellParams::Gated(p) => {
                let GatedParams {
                    w_ix,
                    w_fx,
                    w_ox,
                    w_sx,
                    w_ih,
                    w_fh,
                    w_oh,
                    w_sh,
                    dos,
                    b_i,
                    b_f,
                    b_o,
                    b_s,
                    ..
                } = p;
                let mut out: Vec<(String, &mut [f64])> = vec![
                    ("w_ix".into(), w_ix.as_mut_slice()),
                    ("w_fx".into(), w_fx.as_mut_slice()),
                    ("w_ox".into(), w_ox.as_mut_slice()),
                    ("w_sx".into(), w_sx.as_mut_slice()),
                    ("w_ih".into(), w_ih.as_mut_slice()),
                    ("w_fh".into(), w_fh.as_mut_slice()),
                    ("w_oh".into(), w_oh.as_mut_slice()),
                    ("w_sh".into(), w_sh.as_mut_slice()),
                ];
                for d in dos.iter_mut() {
                    let n = d.order;
                    out.push((format!("w_id{n}"), d.w_id.as_mut_slice()));
                    out.push((format!("w_fd{n}"), d.w_fd.as_mut_slice()));
                    out.push((format!("w_od{n}"), d.w_od.as_mut_slice()));
                }
                out.push(("b_i".into(), b_i.as_mut_slice()));
                out.push(("b_f".into(), b_f.as_mut_slice()));
                out.push(("b_o".into(), b_o.as_mut_slice()));
                out.push(("b_s".into(), b_s.as_mut_slice()));
                out
            }
        }
    }
}

impl Params {
    pub fn zeros(config: &StackConfig) -> Self {
        let layers = config
            .layers
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let mut p = CellParams::zeros(l.kind, config.layer_input(k), l.state_units);
                if let CellParams::Gated(g) = &mut p {
                    g.tied_hidden = config.tie_gate_hidden_weights;
                }
                p
            })
            .collect();
        Params {
            layers,
            output: OutputParams {
                w_yh: Matrix::zeros(config.output_classes, config.top_units()),
                b_y: Vector::zeros(config.output_classes),
            },
        }
    }

    pub fn random(config: &StackConfig, rng: &mut Rng) -> Self {
        let layers = config
            .layers
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let mut p = CellParams::random(l.kind, config.layer_input(k), l.state_units, rng);
                if let CellParams::Gated(g) = &mut p {
                    g.tied_hidden = config.tie_gate_hidden_weights;
                }
                p
            })
            .collect();
        Params {
            layers,
            output: OutputParams {
                w_yh: random_matrix(config.output_classes, config.top_units(), rng),
                b_y: Vector::zeros(config.output_classes),
            },
        }
    }

    /// All tensors in a fixed order, named `layer{k}.{name}` / `output.{name}`.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (k, l) in self.layers.iter().enumerate() {
            for (name, t) in l.tensors() {
                out.push((format!("layer{k}.{name}"), t));
            }
        }
        out.push(("output.w_yh".into(), self.output.w_yh.as_slice()));
        out.push(("output.b_y".into(), self.output.b_y.as_slice()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (k, l) in self.layers.iter_mut().enumerate() {
            for (name, t) in l.tensors_mut() {
                out.push((format!("layer{k}.{name}"), t));
            }
        }
        out.push(("output.w_yh".into(), self.output.w_yh.as_mut_slice()));
        out.push(("output.b_y".into(), self.output.b_y.as_mut_slice()));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zeros_like(&self) -> Params {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    /// Euclidean norm over every entry.
    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// `self += alpha * other`; tensors must be congruent.
    pub fn axpy(&mut self, alpha: f64, other: &Params) -> Result<()> {
        let src = other.tensors();
        let mut dst = self.tensors_mut();
        if src.len() != dst.len() {
            return Err(Error::shape(
                "params axpy",
                format!("{} tensors", dst.len()),
                format!("{} tensors", src.len()),
            ));
        }
        for ((dn, d), (sn, s)) in dst.iter_mut().zip(&src) {
            if d.len() != s.len() || dn != sn {
                return Err(Error::shape(
                    "params axpy",
                    format!("{dn} len {}", d.len()),
                    format!("{sn} len {}", s.len()),
                ));
            }
            for (a, b) in d.iter_mut().zip(s.iter()) {
                *a += alpha * b;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= alpha);
        }
    }

    /// Checks that every tensor matches the shapes implied by `config`.
    pub fn check_against(&self, config: &StackConfig) -> Result<()> {
        let expected = Params::zeros(config);
        let a = self.tensors();
        let b = expected.tensors();
        if a.len() != b.len() {
            return Err(Error::shape(
                "params",
                format!("{} tensors", a.len()),
                format!("config implies {}", b.len()),
            ));
        }
        for ((an, at), (bn, bt)) in a.iter().zip(&b) {
            if an != bn || at.len() != bt.len() {
                return Err(Error::shape(
                    "params",
                    format!("{an} len {}", at.len()),
                    format!("{bn} len {}", bt.len()),
                ));
            }
        }
        if self.output.w_yh.shape() != expected.output.w_yh.shape() {
            return Err(Error::shape(
                "params",
                format!("output.w_yh {}", self.output.w_yh),
                format!("config implies {}", expected.output.w_yh),
            ));
        }
        for (k, ((l, e), spec)) in self
            .layers
            .iter()
            .zip(&expected.layers)
            .zip(&config.layers)
            .enumerate()
        {
            if l.matrix_shapes() != e.matrix_shapes() {
                return Err(Error::shape(
                    "params",
                    format!("layer {k} matrices {:?}", l.matrix_shapes()),
                    format!("config implies {:?}", e.matrix_shapes()),
                ));
            }
            if let (CellParams::Gated(g), CellParams::Gated(ge)) = (l, e) {
                let orders: Vec<usize> = g.dos.iter().map(|d| d.order).collect();
                let want: Vec<usize> = ge.dos.iter().map(|d| d.order).collect();
                if orders != want {
                    return Err(Error::shape(
                        "params",
                        format!("layer {k} DoS orders {orders:?}"),
                        format!("config implies {want:?}"),
                    ));
                }
            }
            if l.state_units() != spec.state_units || l.input_units() != config.layer_input(k) {
                return Err(Error::shape(
                    "params",
                    format!("layer {k} {}x{}", l.state_units(), l.input_units()),
                    format!("config {}x{}", spec.state_units, config.layer_input(k)),
                ));
            }
        }
        Ok(())
    }
}
