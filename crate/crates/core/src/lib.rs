//! Spectral-element solvers on boxes built on fast diagonalization of the
//! tensor-product discrete Laplacian.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod quadrature;
pub mod sem1d;
pub mod tensor_ops;
pub mod direct_solver;
pub mod krylov;
pub mod cahn_hilliard;
pub mod fft_comparator;
pub mod io;
pub mod bench;

pub use error::{Error, Result};
