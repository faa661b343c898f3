use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("not a density matrix: {0}")]
    InvalidState(String),

    #[error("invalid qubit selection: {0}")]
    InvalidQubits(String),

    #[error("state vector is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("conditioning on an outcome of probability {0:e}")]
    ImpossibleOutcome(f64),

    #[error("`{name}` = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("cannot parse `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("invalid setting {setting}: {reason}")]
    InvalidSetting { setting: String, reason: String },

    #[error("no record for setting {0}")]
    MissingSetting(String),

    #[error("more than one record for setting {0}")]
    DuplicateSetting(String),

    #[error("record set is inconsistent: {0}")]
    InvalidRecords(String),

    #[error(
        "no (p, c) in the unit square reproduces F = {fidelity} and mean error rate {epsilon}"
    )]
    NoCalibration { fidelity: f64, epsilon: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}
