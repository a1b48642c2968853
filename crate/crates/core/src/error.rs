//! Error types shared across the simulation crates.

use std::fmt;

/// Errors raised by world construction and the simulation itself.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Invalid configuration value (bad tariff table, non-positive stddev, ...).
    Config(String),
    /// An operation was called outside its domain (non-positive distance, ...).
    Domain(String),
    /// Price-ledger bookkeeping violation (double discount, ...).
    Ledger(String),
    /// A caller broke an interface contract (action vector length, ...).
    Contract(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Config(msg) => write!(f, "configuration error: {msg}"),
            CoreError::Domain(msg) => write!(f, "domain error: {msg}"),
            CoreError::Ledger(msg) => write!(f, "ledger error: {msg}"),
            CoreError::Contract(msg) => write!(f, "contract violation: {msg}"),
        }
    }
}

impl std::error::Error for CoreError {}

pub type Result<T> = std::result::Result<T, CoreError>;
