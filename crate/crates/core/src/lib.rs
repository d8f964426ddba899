//! Numerical lab for anchored viscosity flows and their discrete
//! counterparts.

// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod discrete;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod operators;
pub mod quad;
pub mod schedule;
pub mod space;

pub use error::{Error, Result};
