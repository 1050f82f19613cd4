//! Exact non-locality and non-bilocality quantifiers for Bell scenarios,
//! quantum correlation generators and labeled-dataset tooling.

pub mod classify;
pub mod dataset;
pub mod error;
pub mod lp;
pub mod optimize;
pub mod sampler;
pub mod scenario;

pub use error::{Error, Result};
