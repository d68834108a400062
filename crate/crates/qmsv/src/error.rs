//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Unsupported or malformed audio input.
    #[error("audio error: {0}")]
    Audio(String),

    /// Malformed container or text file.
    #[error("format error: {0}")]
    Format(String),

    /// Invalid configuration value or combination.
    #[error("config error: {0}")]
    Config(String),

    /// Array shape or model dimension disagreement.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// Not enough data for the requested estimation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Truncation asked for more active frames than the utterance has.
    #[error("insufficient active speech: {available} frames available, {required} required")]
    InsufficientActiveSpeech { available: usize, required: usize },

    /// A required field (label, score, quality, covariance) is absent.
    #[error("missing input: {0}")]
    MissingInput(String),

    /// Metric or training set contains only one of the two trial classes.
    #[error("single-class input: {0}")]
    SingleClass(String),

    /// Numerical failure (non-SPD matrix, divergent value).
    #[error("numerical error: {0}")]
    Numerical(String),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
