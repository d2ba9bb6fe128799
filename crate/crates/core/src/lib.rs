//! Drift-aware stream learning.
//!
//! The pipeline: a chronological [`stream`] of records is encoded by a
//! [`preprocess::EncoderState`] fitted on a warm-up prefix, classified by an
//! incremental [`nb::NaiveBayesModel`], and monitored by a change detector
//! from [`detect`] watching the 0/1 prediction-error stream. On an alarm the
//! [`adapt::Controller`] retrains the model on data chosen by a
//! [`adapt::SelectionStrategy`]. [`eval`] drives the loop prequentially
//! (test, then train) and [`synth`] produces streams with known drift.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapt;
pub mod detect;
pub mod error;
pub mod eval;
pub mod nb;
pub mod preprocess;
pub mod stream;
pub mod synth;

pub use error::{Error, Result};
