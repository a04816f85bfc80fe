//! Reliable road-rail intermodal freight routing under capacity uncertainty.

// Negated comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod mifr;
pub mod netmodel;
pub mod paths;
pub mod robust;
pub mod solver;
pub mod vulnerability;

pub use error::{Error, Result};
