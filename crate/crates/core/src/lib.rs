//! Geometry of non-Hermitian quantum dynamics on manifolds of fixed-rank
//! density operators.
//!
//! - [`linalg`]: clustered Hermitian eigendecomposition, PSD square root,
//!   pseudoinverse, polar factorization, and the matrix JSON format.
//! - [`state`] and [`metric`]: density operators, tangent vectors and their
//!   coherent/classical/lifting split, monotone and Bures metrics, SLDs,
//!   quantum Fisher information, fidelity, entropy.
//! - [`dynamics`]: RK4 integration of the normalized non-Hermitian master
//!   equation with success-probability tracking, success-rate optimal
//!   generators, shortcut-to-adiabaticity synthesis, Bures speed and speed
//!   limits.
//! - [`purification`] and [`geodesic`]: minimal purifications, fiber
//!   alignment, horizontal lifts, shortest geodesics and the non-Hermitian
//!   generator that drives them.

#![forbid(unsafe_code)]

pub mod dynamics;
pub mod error;
pub mod geodesic;
pub mod linalg;
pub mod metric;
pub mod purification;
pub mod sampling;
pub mod state;

pub use error::{Error, Result};
