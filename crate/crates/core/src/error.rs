use alloc::string::String;

use crate::model::Violation;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("invalid tariff: {0}")]
    InvalidTariff(String),

    #[error("invalid battery spec: {0}")]
    InvalidBattery(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("row {row} is not stochastic (sums to {sum})")]
    NotStochastic { row: usize, sum: f64 },

    #[error("negative probability mass")]
    NegativeProbability,

    #[error("slot {slot}: {violation}")]
    Infeasible { slot: usize, violation: Violation },

    #[error("instance is infeasible: demand cannot be served from slot {slot}")]
    InfeasibleInstance { slot: usize },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("cut-off {cutoff_hz} Hz is above the Nyquist frequency {nyquist_hz} Hz")]
    CutoffAboveNyquist { cutoff_hz: f64, nyquist_hz: f64 },

    #[error("observation at slot {slot} has zero probability under the model")]
    ZeroProbability { slot: usize },

    #[error("q has no mass at index {index} where p is positive")]
    AbsoluteContinuity { index: usize },

    #[error("alphabet of size {size} exceeds the supported maximum {max}")]
    AlphabetTooLarge { size: usize, max: usize },

    #[error("state space too large: {0}")]
    StateSpaceTooLarge(String),

    #[error("unsupported noise density: {0}")]
    UnsupportedDensity(&'static str),

    #[error("value {value} at slot {slot} is not on the quantization grid")]
    OffGrid { slot: usize, value: f64 },

    #[error("value {value} at slot {slot} is outside the channel input alphabet")]
    NotInAlphabet { slot: usize, value: f64 },

    #[error("per-appliance data missing or ragged")]
    MissingApplianceData,
}
