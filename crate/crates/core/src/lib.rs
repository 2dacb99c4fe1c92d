//! Variational Monte Carlo with normalizing-flow trial wavefunctions.
//!
//! The crate is `no_std` (with `alloc`) and carries all of the numerics:
//! dense linear algebra, a batched reverse-mode tape, RealNVP-style flows
//! and their Z2-symmetrized mixtures, quartic bosonic Hamiltonians, energy
//! estimators, Fisher geometry, the training loop, the analytic Gaussian
//! baseline, and the 1-D variational-principle ODE demo. File formats and
//! the command line live in the companion `flowvmc` crate.

#![no_std]
#![forbid(unsafe_code)]
// when std is anywhere in the crate graph its inherent float methods shadow the libm trait
#![allow(unused_imports)]
// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod autodiff;
pub mod error;
pub mod estimators;
pub mod flow;
pub mod gaussian;
pub mod geometry;
pub mod hamiltonian;
pub mod numerics;
pub mod optimize;
pub mod tdvp;

pub use error::{Error, Result};
pub use numerics::{Matrix, RngStream};
