//! Key extraction from correlated continuous data: multidimensional
//! reverse reconciliation, multi-edge-type LDPC codes, density evolution,
//! rate adaptation and Toeplitz privacy amplification.

pub mod code;
pub mod de;
pub mod decoder;
pub mod error;
pub mod extract;
pub mod met;
pub mod privacy;
pub mod rate_adapt;
pub mod reconcile;

pub use error::{PostprocError, Result};
