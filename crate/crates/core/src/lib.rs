//! Explainable dataset-shift detection.
//!
//! Source and target image samples are reduced to low-dimensional
//! representations (PCA, sparse random projection, task-classifier outputs or
//! concept-predictor outputs) and compared with two-sample tests. When the
//! representation is made of concept predictions, the per-concept test
//! statistics are normalized into a Concept Shift Score that ranks which
//! human-interpretable factors moved.

pub mod datagen;
pub mod detector;
pub mod error;
pub mod harness;
pub mod models;
pub mod rng;
pub mod shifts;
pub mod stattests;

pub use error::{Error, Result};
