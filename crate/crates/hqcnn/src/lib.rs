//! Dataset handling, training, evaluation, checkpoints and ensembles for the
//! hybrid quantum-classical classifiers in `hqcnn-core`.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod ensemble_eval;
mod error;
pub mod pipeline;
pub mod predictions;
pub mod report;
pub mod train;

pub use error::{Error, Result};
