//! Secret-key-rate analysis for four-state discretely modulated CV-QKD with a
//! local local oscillator, under the linear-channel assumption.
//!
//! The closed-form bound in [`lca`] trusts the detector noise. The shared
//! parameter types, Gaussian entropy helpers and the null-key threshold
//! search are reused by the numerical bound and the noise budget.

pub mod entropy;
pub mod error;
pub mod lca;
pub mod params;
pub mod threshold;

pub use error::{Error, Result};
pub use params::{ChannelScenario, Method, ProtocolParams, SkrReport};
