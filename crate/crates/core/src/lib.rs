#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod bounds;
pub mod config;
pub mod error;
pub mod experiment;
pub mod forcing;
pub mod grid;
pub mod operators;
pub mod sample;
pub mod stepper;
pub mod weights;

pub use error::{Error, Result};
