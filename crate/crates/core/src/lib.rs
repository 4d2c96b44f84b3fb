//! Finite-dimensional Hilbert C*-modules, completely positive maps and the
//! KSGNS dilation, with every structural identity exposed as a residual check.

pub mod cp;
pub mod cstar;
pub mod equivariant;
pub mod error;
pub mod harness;
pub mod hilbert;
pub mod ksgns;
pub mod numkernel;
pub mod poscor;
pub mod random;

pub use error::{Error, Result};
