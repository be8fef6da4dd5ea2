//! Kernel score estimation for Gaussian-smoothed densities and a Brownian
//! reverse-SDE sampler.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, threads or the command line lives in the `score-forge` crate.
//!
//! The main pieces:
//!
//! * [`kernel`]: compactly supported kernels of arbitrary order built from
//!   Legendre polynomials, and their d-dimensional product form.
//! * [`dist`]: isotropic Gaussian mixtures with exact samplers and closed-form
//!   smoothed density / score oracles.
//! * [`estimator`]: the kernel density estimate of `p_t`, its gradient and the
//!   truncated score estimator.
//! * [`sampler`]: Euler–Maruyama integration of the reverse SDE with early
//!   stopping, plus the OU/Brownian time change.
//! * [`metrics`]: score MSE, integrated score error, TV distance and log-log
//!   slope fits.
#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod dist;
pub mod estimator;
pub mod exec;
pub mod grid;
pub mod kernel;
pub mod legendre;
pub mod metrics;
pub mod points;
pub mod sampler;
pub mod seed;

pub use error::Error;
pub use exec::{Executor, Sequential};
pub use points::Points;

pub type Result<T, E = Error> = core::result::Result<T, E>;
