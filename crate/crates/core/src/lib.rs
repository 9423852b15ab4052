//! Tunnel-diode oscillator toolkit.
//!
//! The crate covers the whole chain from a parametric Esaki diode model through
//! transient simulation of the oscillator board, calibrated power spectra, bias-sweep
//! signature maps, fingerprint enrollment and identification, and free-space RFID
//! link budgets.

pub mod circuit;
pub mod diode;
pub mod error;
pub mod fingerprint;
pub mod link_budget;
pub mod signature;
pub mod spectral;
pub mod units;

pub use error::{Error, Result};
