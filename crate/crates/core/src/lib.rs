//! Discretization, H-infinity synthesis, simulation and numerical verification
//! for a controlled logistic reaction-diffusion model of distress propagation.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod spatial;
pub mod synthesis;
pub mod verify;

pub use error::{Error, Result};
