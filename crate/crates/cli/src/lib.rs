//! Command-line pipeline: corpus to datasets, responses to rewards and
//! preference data, predictions to metrics.

pub mod app;
pub mod config;
pub mod stages;

pub use app::run;
