//! Scenario-driven harness for the four-state CV-QKD toolkit: key rates,
//! null-key thresholds, noise budgets, closed-loop simulation campaigns
//! and desk-scale key extraction, each reported as JSON, CSV and a
//! gnuplot script.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use config::Scenario;
pub use error::{CliError, Result};
