//! Signal-integrity qualification of high-speed PCB via transitions.
//!
//! Touchstone I/O, S/T-parameter algebra, element synthesis, time-domain
//! eye analysis, broadband reflected voltage (BRV) extraction, Monte Carlo tolerance
//! studies and fabrication-rule checks.

pub mod designs;
pub mod error;
pub mod network;
pub mod touchstone;
pub mod algebra;
pub mod synth;
pub mod time_domain;
pub mod brv;
pub mod mc;
pub mod rules;
pub mod export;
pub mod cli;

pub use error::{Error, Result};
pub use network::{DataFormat, SParameterNetwork};
