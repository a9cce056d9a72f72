//! Simulation toolkit for collisionally coupled alkali / noble-gas spin ensembles.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffmodes;
pub mod error;
pub mod kinetics;
pub mod manybody;
pub mod meanfield;
pub mod numerics;
pub mod output;
pub mod params;
pub mod quantum2mode;
pub mod runner;
pub mod scenario;

pub use error::{Error, Result};
