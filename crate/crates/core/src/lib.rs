//! Numerical laboratory for continuous weak measurement of a collective-spin
//! magnetometer.
//!
//! The crate is organised around four pieces:
//!
//! * [`spin`]: collective angular-momentum operators on the symmetric (Dicke)
//!   subspace and the canonical initial states.
//! * [`trajectory`]: stochastic master equation integrators (Euler and Kraus
//!   forms), the single-qubit Bloch/polar/angular reductions, Wiener
//!   realizations, measurement records and purity diagnostics.
//! * [`fokker_planck`]: stationary distribution of the angular SDE by
//!   continued fractions, probability current, stationary moments, spectral
//!   time evolution and ergodicity checks.
//! * [`estimation`]: log-likelihood and log-likelihood-gradient SDEs, the
//!   B-scan estimator and the real-time simultaneous state/field estimator.
//!
//! [`experiment`] and [`record_io`] provide the record file format and the desk-scale
//! experiments run by the `magtraj` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod experiment;
pub mod fokker_planck;
pub mod record_io;
pub mod spin;
pub mod trajectory;

pub use error::{Error, Result};
pub use spin::{CMatrix, CollectiveOps, DensityMatrix};
