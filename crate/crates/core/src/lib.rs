//! Dynamic mode decomposition of gridded snapshot sequences, with
//! sparsity-promoting selection of a small set of dominant modes.
//!
//! The pipeline runs bottom-up:
//! [`snapshot`] builds and stores data matrices, [`dmd`] computes the
//! reduced operator, eigenvalues, modes and optimal amplitudes, [`sparse`]
//! solves the ℓ1-regularized amplitude problem with ADMM and polishes the
//! result, and [`analysis`] turns eigenvalues into periods and growth classes.
//! [`synthetic`] produces fixtures with known modal content.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dmd;
pub mod error;
mod linalg;
pub mod snapshot;
pub mod sparse;
pub mod synthetic;

pub use error::{Error, Result};
pub use faer::{c64, Mat};
