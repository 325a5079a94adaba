//! Fault localization for small neural networks.
//!
//! The crate trains target networks with per-epoch instrumentation, injects
//! hyperparameter and structural faults by mutation, turns each training run
//! into a fixed-shape feature matrix plus a token sequence of its static
//! graph, and trains an encoder-decoder LSTM that maps those inputs to a
//! ranked set of fault classes.

pub mod error;
pub mod graph;
pub mod localizer;
pub mod mutator;
pub mod nn;
pub mod pipeline;
pub mod probe;
pub mod rng;

pub use error::{Error, Result};
