//! Quaternionic Wiener algebras.
//!
//! Slice-regular power series with quaternionic matrix coefficients, their
//! star-product, invertibility tests, Wiener-Hopf factorization (discrete and
//! continuous), realization-based canonical factorization, and solvers for
//! difference and convolution equations on the half-line.

pub mod apw;
pub mod circle;
pub mod cli;
pub mod continuous;
pub mod embedding;
pub mod error;
pub mod factorization;
pub mod linalg;
pub mod qmatrix;
pub mod quaternion;
pub mod rational;
pub mod realization;
pub mod series;
pub mod solvers;

pub use error::{Error, Result};
pub use qmatrix::QMatrix;
pub use quaternion::{Quaternion, SliceFrame};
