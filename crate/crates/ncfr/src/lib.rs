//! Noncommutative rational functions on the row-ball.
//!
//! Realizations, Szegő-kernel Gram models, Sarason outer functions and the
//! rational Fejér–Riesz factorization, with a truncated Fock-space oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dd;
pub mod error;
pub mod fejerriesz;
pub mod focktrunc;
pub mod freecore;
pub mod kernels;
pub mod linalg;
pub mod ncparse;
pub mod realize;
pub mod sarason;

pub use error::{NcError, Result};
pub use freecore::{FreeSeries, Word};
pub use realize::{DescriptorRealization, FMRealization, MatrixTuple};

pub use num_complex::Complex64;
