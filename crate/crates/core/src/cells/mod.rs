//! Recurrent cell dynamics: classical RNN, LSTM, single-order DoS cells,
//! summed-order dRNN cells, and stacks of them.

mod config;
mod params;
mod stack;
mod step;

pub use config::{Arch, CellKind, LayerSpec, StackConfig, MAX_DOS_ORDER};
pub use params::{CellParams, DosWeights, GatedParams, OutputParams, Params, RnnParams};
pub use stack::{dos_energy, stack_forward, Model, Tape};
pub use step::{
    dos, dos_cell_step, drnn_cell_step, lstm_step, rnn_step, step, GatedStep, LayerState,
    RnnStep, StepRecord,
};
