//! Model drift detection over labeled data streams.
//!
//! A model trained on a reference period is monitored by comparing, per input
//! feature, how much revealing that feature lowers the model's masked risk on
//! a reference window versus a window of new samples. Features whose risk
//! contribution changed beyond a bootstrap threshold are reported as the
//! interpretation of the drift.

pub mod baselines;
pub mod bootstrap;
pub mod datagen;
pub mod detector;
pub mod domain;
pub mod error;
pub mod eval;
pub mod model;
pub mod statistic;

pub use domain::{
    derive_seed, loss, mask, DetectorConfig, FeatureSet, LabeledSample, LossKind, Prediction, SampleWindow,
    Standardizer, TaskKind,
};
pub use error::{DriftError, Result};
