//! SRAM-PUF characterization workbench.
//!
//! The crate models SRAM macros ([`layout`]), generates synthetic chips
//! with process-variation and orientation-dependent bias ([`simchip`]),
//! evaluates reliability and entropy metrics ([`metrics`]), detects bias
//! patterns and their direction ([`biasdetect`]), and emulates the serial
//! test harness used to collect power-up data ([`chipnet`]).
//!
//! Numeric code is generic over [`Real`]; the aliases below fix the scalar
//! type to `f64` for everyday use.

pub mod analysis;
pub mod biasdetect;
pub mod chipnet;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod report;
pub mod layout;
pub mod scalar;
pub mod seed;
pub mod simchip;

pub use scalar::Real;

pub type ProcessParams = simchip::ProcessParams<f64>;
pub type ProcessParams32 = simchip::ProcessParams<f32>;
pub type DeviceArray = simchip::DeviceArray<f64>;
pub type DeviceArray32 = simchip::DeviceArray<f32>;
pub type BiasProfile = biasdetect::BiasProfile<f64>;
