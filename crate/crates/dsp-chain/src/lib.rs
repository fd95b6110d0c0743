//! Receiver DSP that turns digitized heterodyne records into
//! phase-corrected symbols, raw key bits and channel estimates.

pub mod chain;
pub mod error;
pub mod export;
pub mod keymap;

pub use error::{DspError, Result};
