//! Waveform-level simulation of the four-state transceiver: pulse-shaped
//! symbols with a frequency-multiplexed pilot, a lossy noisy channel with
//! laser phase noise, heterodyne detection and ADC quantization. Frames
//! and their ground truth can be written to and read back from disk.

pub mod constellation;
pub mod error;
pub mod filters;
pub mod frame_io;
pub mod sim;

pub use error::{Result, SimError};
