//! Pump-probe linear-response simulator for the mixed-field Ising chain.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dense;
pub mod drive;
pub mod error;
pub mod fourier;
pub mod krylov;
pub mod lattice;
pub mod measure;
pub mod parallel;
pub mod propagator;
pub mod response;
pub mod runner;
pub mod spectral;
pub mod vacuum;

pub use error::{Error, Result};
