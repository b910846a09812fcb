//! Preconditioned primal-dual flows for `min f(x) + g(Ax)`.
//!
//! `no_std` with `alloc`. Dense linear algebra comes from nalgebra.

#![no_std]

extern crate alloc;
#[cfg(test)]
#[macro_use]
extern crate std;

pub mod diagnostics;
mod error;
pub mod flow;
mod math;
pub mod problem;
pub mod schedules;
pub mod solvers;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;
