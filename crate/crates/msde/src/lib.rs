//! Mean-shift density enhancement: an unsupervised anomaly detector that
//! scores points by the cumulative displacement they undergo during
//! density-weighted mean-shift iterations, plus the benchmark harness used
//! to evaluate it on synthetic anomaly taxonomies.

pub mod bench;
pub mod dataset;
pub mod error;
pub mod fuzzygraph;
pub mod meanshift;
pub mod neighbors;
pub mod pipeline;
pub mod weights;

pub use dataset::{Dataset, Matrix, RngSeed};
pub use error::{Error, Result};
pub use pipeline::{run_msde, MsdeConfig, MsdeOutcome};
