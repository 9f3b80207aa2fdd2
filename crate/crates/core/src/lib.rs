//! Out-of-distribution performance prediction engine.
//!
//! Scores recorded model outputs with ten label-free estimators, compares the
//! scores against ground-truth accuracies, and renders leaderboards.

pub mod metrics;
pub mod synth;
pub mod scoring;
pub mod harness;
pub mod tensor_io;

pub use tensor_io::{ModelRecord, PredictionSet, TensorF32, TensorI64};
