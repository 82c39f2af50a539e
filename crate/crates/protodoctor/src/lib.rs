//! Interpretable prototype-based mortality prediction for ICU time series.
//!
//! The crate covers the full pipeline: a synthetic EHR cohort generator,
//! benchmark-style preprocessing, sequence and demographic encoders, a
//! prototype module that tracks each stay's clinical course, a demographic
//! module that adjusts risk per population subgroup, composite-objective
//! training with early stopping, evaluation (AUROC / AUPRC), and case-level
//! interpretation reports.
//!
//! Start with the runnable programs in `examples/`; each one exercises a
//! single capability end to end. The `protodoctor` binary wraps the same
//! entry points as subcommands.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod ehr;
pub mod encoders;
pub mod error;
pub mod evaluation;
pub mod interpretation;
pub mod model;
pub mod nn;
pub mod predictor;
pub mod prototypes;
pub mod schema;
pub mod training;

pub use error::{Error, Result};
