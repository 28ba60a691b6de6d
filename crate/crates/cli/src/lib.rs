//! Experiment harness for Hamiltonian Q-learning: configuration files,
//! training runs, and plot-ready CSV artifacts.

pub mod compare;
pub mod config;
pub mod error;
pub mod run;

pub use config::{RunConfig, SliceSpec};
pub use error::CliError;
