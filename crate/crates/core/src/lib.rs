//! Exact outage and ergodic-capacity statistics for correlated fluid and
//! conventional RIS cascaded channels, with a Monte Carlo cross-check.

// NaN must fail range guards, so `!(x > 0.0)` is deliberate; the series
// tables keep the digits of their sources.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod channel;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod golden;
pub mod linalg;
pub mod metrics;
pub mod mixture;
pub mod montecarlo;
pub mod quad;
pub mod scenario;
pub mod selection;
pub mod specfun;
mod sum;

pub use error::{FrisError, Result};
