//! Numerical laboratory for the Hayden-Preskill decoding error of brickwork
//! qudit circuits.
//!
//! The decoding error is computed three ways: exact dense simulation
//! ([`hpcore`] on top of [`brickwork`]), Haar-averaged domain-wall evolution
//! ([`membrane`]), and closed-form [`predictions`].

extern crate blas_src;

pub mod brickwork;
pub mod error;
pub mod fit;
pub mod hpcore;
mod kernels;
pub mod membrane;
pub mod predictions;
pub mod qgates;
pub mod special;
pub mod weyl;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
