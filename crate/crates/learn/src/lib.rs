//! Neural regressors and classifiers for Bell-scenario datasets, with tree
//! blenders, baselines and evaluation.

pub mod baseline;
pub mod ensemble;
pub mod metrics;
pub mod mlp;
pub mod trees;
pub mod io;
pub mod pipeline;
