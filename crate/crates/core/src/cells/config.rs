use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest DoS order accepted by the builders.
pub const MAX_DOS_ORDER: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CellKind {
    ClassicalRnn,
    Lstm,
    /// LSTM whose gates see a single DoS order.
    Dos { order: usize },
    /// LSTM whose gates see the sum of DoS orders `0..=max_order`.
    Drnn { max_order: usize },
}

impl CellKind {
    /// DoS orders wired into the gates, ascending.
    pub fn gate_orders(&self) -> Vec<usize> {
        match *self {
            CellKind::ClassicalRnn | CellKind::Lstm => Vec::new(),
            CellKind::Dos { order } => vec![order],
            CellKind::Drnn { max_order } => (0..=max_order).collect(),
        }
    }

    /// Highest order whose lagged states the layer has to remember.
    pub fn max_order(&self) -> usize {
        match *self {
            CellKind::ClassicalRnn | CellKind::Lstm => 0,
            CellKind::Dos { order } => order,
            CellKind::Drnn { max_order } => max_order,
        }
    }

    pub fn is_gated(&self) -> bool {
        !matches!(self, CellKind::ClassicalRnn)
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellKind::ClassicalRnn => write!(f, "rnn"),
            CellKind::Lstm => write!(f, "lstm"),
            CellKind::Dos { order } => write!(f, "dos{order}"),
            CellKind::Drnn { max_order } => write!(f, "drnn{max_order}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: CellKind,
    pub state_units: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackConfig {
    pub input_units: usize,
    pub output_classes: usize,
    pub layers: Vec<LayerSpec>,
    /// Reuse `W_ih` in the forget and output gates instead of `W_fh`/`W_oh`.
    #[serde(default)]
    pub tie_gate_hidden_weights: bool,
}

impl StackConfig {
    pub fn new(input_units: usize, output_classes: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        let cfg = StackConfig {
            input_units,
            output_classes,
            layers,
            tie_gate_hidden_weights: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_arch(arch: Arch, input_units: usize, state_units: usize, classes: usize) -> Result<Self> {
        let layers = arch
            .kinds()
            .into_iter()
            .map(|kind| LayerSpec { kind, state_units })
            .collect();
        StackConfig::new(input_units, classes, layers)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Invalid("stack has no layers".into()));
        }
        if self.input_units == 0 {
            return Err(Error::Invalid("input_units must be positive".into()));
        }
        if self.output_classes == 0 {
            return Err(Error::Invalid("output_classes must be positive".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.state_units == 0 {
                return Err(Error::Invalid(format!("layer {i} has zero state units")));
            }
            if l.kind.max_order() > MAX_DOS_ORDER {
                return Err(Error::Invalid(format!(
                    "layer {i}: DoS order {} exceeds {MAX_DOS_ORDER}",
                    l.kind.max_order()
                )));
            }
        }
        Ok(())
    }

    /// Input width of layer `k`.
    pub fn layer_input(&self, k: usize) -> usize {
        if k == 0 {
            self.input_units
        } else {
            self.layers[k - 1].state_units
        }
    }

    pub fn top_units(&self) -> usize {
        self.layers.last().map_or(0, |l| l.state_units)
    }
}

/// Named architecture families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arch {
    Rnn,
    Lstm,
    /// `L` homogeneous LSTM layers.
    Stacked(usize),
    /// One layer summing DoS orders `0..=N`.
    Drnn(usize),
    /// `L` layers, layer `k` gated by DoS order `k`.
    D2rnn(usize),
    /// One layer gated by DoS order `n`.
    Dos(usize),
}

impl Arch {
    pub fn kinds(&self) -> Vec<CellKind> {
        match *self {
            Arch::Rnn => vec![CellKind::ClassicalRnn],
            Arch::Lstm => vec![CellKind::Lstm],
            Arch::Stacked(l) => vec![CellKind::Lstm; l],
            Arch::Drnn(n) => vec![CellKind::Drnn { max_order: n }],
            Arch::D2rnn(l) => (0..l).map(|order| CellKind::Dos { order }).collect(),
            Arch::Dos(n) => vec![CellKind::Dos { order: n }],
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arch::Rnn => write!(f, "rnn"),
            Arch::Lstm => write!(f, "lstm"),
            Arch::Stacked(l) => write!(f, "stacked:{l}"),
            Arch::Drnn(n) => write!(f, "drnn:{n}"),
            Arch::D2rnn(l) => write!(f, "d2rnn:{l}"),
            Arch::Dos(n) => write!(f, "dos:{n}"),
        }
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Invalid(format!(
                "bad architecture '{s}' (expected rnn, lstm, stacked:L, drnn:N, d2rnn:L or dos:n)"
            ))
        };
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a.parse::<usize>().map_err(|_| bad())?)),
            None => (s, None),
        };
        let arch = match (name, arg) {
            ("rnn", None) => Arch::Rnn,
            ("lstm", None) => Arch::Lstm,
            ("stacked", Some(l)) if l >= 1 => Arch::Stacked(l),
            ("drnn", Some(n)) => Arch::Drnn(n),
            ("d2rnn", Some(l)) if l >= 1 => Arch::D2rnn(l),
            ("dos", Some(n)) => Arch::Dos(n),
            _ => return Err(bad()),
        };
        if arch.kinds().iter().any(|k| k.max_order() > MAX_DOS_ORDER) {
            return Err(bad());
        }
        Ok(arch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d2rnn_three_layers_uses_orders_zero_to_two() {
        let arch: Arch = "d2rnn:3".parse().unwrap();
        assert_eq!(
            arch.kinds(),
            vec![
                CellKind::Dos { order: 0 },
                CellKind::Dos { order: 1 },
                CellKind::Dos { order: 2 }
            ]
        );
    }

    #[test]
    fn stacked_is_homogeneous_lstm() {
        let arch: Arch = "stacked:3".parse().unwrap();
        assert_eq!(arch.kinds(), vec![CellKind::Lstm; 3]);
    }

    #[test]
    fn arch_round_trips_through_display() {
        for s in ["rnn", "lstm", "stacked:2", "drnn:2", "d2rnn:3", "dos:1"] {
            assert_eq!(s.parse::<Arch>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn bad_arch_strings() {
        for s in ["", "lstm:2", "stacked", "stacked:0", "d2rnn:x", "gru", "dos:99"] {
            assert!(s.parse::<Arch>().is_err(), "{s}");
        }
    }

    #[test]
    fn table_one_shapes() {
        let nus = StackConfig::from_arch(Arch::D2rnn(3), 300, 200, 6).unwrap();
        assert_eq!(nus.layer_input(0), 300);
        assert_eq!(nus.layer_input(2), 200);
        assert_eq!(nus.output_classes, 6);
        let vf = StackConfig::from_arch(Arch::D2rnn(3), 500, 300, 2).unwrap();
        assert_eq!(vf.top_units(), 300);
    }
}
