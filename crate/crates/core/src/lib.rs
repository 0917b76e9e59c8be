//! Subdiffusion forward solvers and joint reconstruction of a parameter and
//! the terminal time from terminal data.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fem;
pub mod field;
pub mod inverse;
pub mod linalg;
pub mod mesh;
pub mod mittag_leffler;
pub mod problem;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
