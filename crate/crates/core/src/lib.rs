//! Estimation of statistical ergodicity transformations for univariate time series.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autocov;
pub mod diagnostics;
pub mod error;
pub mod evaluation;
pub mod factors;
pub mod forecast;
pub mod ingest;
pub mod likelihood;
pub mod policy;
mod regression;
pub mod series;
pub mod simulate;
pub mod special;
pub mod transform;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
