//! Bias-pattern analysis: width detection from the autocorrelation
//! spectrum, run-length template extraction and bias direction against a
//! baseline design.

mod direction;
mod pattern;
mod spectral;

use thiserror::Error;

pub use direction::{
    bias_direction, concat_readout, extract_template, highest_autocorrelation, phase_polarity, BiasProfile,
    ProfileAccumulator,
};
pub use pattern::{
    cyclic_notation, cyclic_pattern, format_run_length, parse_run_length, runs_of, Run, RunLengthPattern,
};
pub use spectral::{
    autocorrelation, autocorrelation_bits, autocorrelation_spectrum, bits_to_real, cross_correlation,
    dominant_period,
};

/// A spectral or correlation peak counts when it exceeds this multiple of
/// the median magnitude of all other bins or lags.
pub const SIGNIFICANCE_RATIO: f64 = 5.0;

/// Largest pattern period considered when correlating against a baseline.
pub const MAX_PERIOD: usize = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BiasError {
    #[error("pattern parse error: {0}")]
    Parse(String),
    #[error("repeating block runs must alternate between 0 and 1")]
    NonAlternatingBlock,
    #[error("input has zero variance")]
    ConstantInput,
    #[error("no significant periodicity")]
    NoPeriodicity,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

/// Detected bias pattern of one design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiasReport {
    pub detected_period: usize,
    pub template: Vec<bool>,
    pub notation: String,
    pub direction: i8,
}

impl BiasReport {
    /// Builds a report whose notation is the cyclic run-length form of
    /// `template`.
    pub fn new(template: Vec<bool>, direction: i8) -> Self {
        BiasReport {
            detected_period: template.len(),
            notation: cyclic_notation(&template),
            template,
            direction,
        }
    }
}
