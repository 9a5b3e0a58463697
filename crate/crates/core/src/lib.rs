//! Social cost of carbon for heterogeneous time and risk preferences.
//!
//! The marginal damage of a carbon pulse does not depend on preferences, so
//! it is computed once per scenario, damage function and income elasticity
//! and then discounted separately for every respondent.

// `!(x > 0.0)` is used throughout to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod appendix;
pub mod config;
pub mod discounting;
pub mod error;
pub mod iam;
pub mod optimize;
pub mod pipeline;
pub mod preferences;
pub mod scc;
pub mod scenario;
pub mod sensitivity;
pub mod stats;
pub mod synthetic;

pub use error::{Error, ErrorClass, Result};
