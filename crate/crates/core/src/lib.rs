//! Anomaly identification for tabletop object-manipulation episodes.
//!
//! The crate labels fused multi-modal sensor sequences with one of three
//! independently implemented sequence models — a bank of binary-state HMMs,
//! a linear-chain CRF (trained with L-BFGS or an AROW-style online update),
//! and a from-scratch LSTM — then reduces the per-step labels to a single
//! anomaly cause by majority voting. A scripted simulator generates labeled
//! episodes for three manipulation scenario families, and the evaluation
//! layer reproduces the 10-run split/train/test benchmark protocol with
//! per-class precision/recall/F metrics and confusion matrices.

pub mod episode;
pub mod crf;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod linalg;
pub mod lstm;
pub mod hmm;
pub mod model_io;
pub mod optim;
pub mod pipeline;
pub mod seed;
pub mod sim;
pub(crate) mod util;

pub use error::{Error, Result};
