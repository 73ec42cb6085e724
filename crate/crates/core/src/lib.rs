//! Recurrent sequence classifiers whose LSTM gates are modulated by
//! finite-difference derivatives of the internal state (DoS), with stacked
//! and summed-order variants, backpropagation through time, training,
//! cross-validation and boosting.

pub mod backprop;
pub mod cells;
pub mod data;
pub mod ensemble;
mod error;
pub mod exec;
pub mod numerics;
pub mod train;

pub use error::{Error, ErrorClass, Result};
