//! Finite-truncation numerics for random walks on groups: convolution powers,
//! spectral radius, Green and Martin kernels, ratio-limit kernels and windowed
//! Fock-space operators.

pub mod accel;
pub mod cli;
pub mod config;
pub mod error;
pub mod fock;
pub mod group;
pub mod ratio;
pub mod report;
pub mod spectral;
pub mod walk;

pub use error::{Error, Result};
pub use group::{Ball, GroupDescriptor, GroupElement};
