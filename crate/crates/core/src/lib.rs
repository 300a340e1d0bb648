//! Level-set reconstruction of piecewise non-constant coefficients in
//! two-dimensional elliptic inverse problems.
//!
//! The crate provides uniform-grid fields and difference operators
//! ([`grid`]), the smoothed level-set parametrization and its penalty
//! functional ([`levelset`]), variable-coefficient Poisson solvers
//! ([`elliptic`]), two forward operators with adjoint machinery
//! ([`operators`]) and the regularized reconstruction loop itself
//! ([`inversion`]).
//!
//! File formats, phantom generation, noise injection and the command line
//! live in the companion `lsr-cli` crate; this crate is `no_std`
//! (with `alloc`) and performs no IO.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod grid;
pub mod levelset;
mod linalg;
pub mod elliptic;
pub mod operators;
pub mod inversion;

pub use error::Error;
