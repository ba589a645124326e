//! Error type shared by every module in the crate.

use thiserror::Error;

use crate::panel::UnitId;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation received an empty input where data is required.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A treatment schedule contains no treated units.
    #[error("schedule contains no treated units")]
    NoTreatedUnits,

    /// Never-treated comparison requested but no unit is never-treated.
    #[error("comparison pool is empty: no never-treated units in schedule")]
    EmptyComparisonPool,

    /// Malformed input row.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The same (unit, time) pair appeared twice.
    #[error("duplicate observation for {unit} at {time}")]
    DuplicateObservation { unit: UnitId, time: String },

    /// Negative cumulative count in a case file.
    #[error("invalid count {value} for {unit} at line {line}")]
    InvalidCount { unit: String, line: usize, value: i64 },

    /// The same unit appeared twice in a policy file.
    #[error("duplicate unit in policy file: {0}")]
    DuplicateUnit(UnitId),

    /// A panel unit has no raw case series to align against.
    #[error("no raw case series for unit {0}")]
    MissingSeries(UnitId),

    /// Outcome units missing from the policy schedule (never defaulted).
    #[error("units present in outcomes but absent from policy schedule: {}", .0.iter().map(|u| u.as_str()).collect::<Vec<_>>().join(", "))]
    MissingUnits(Vec<UnitId>),

    /// A required estimation cell has zero defined observations.
    #[error("no data in cell: {0}")]
    NoData(String),

    /// The reference period is empty for a cohort; the cohort cannot be studied.
    #[error("reference period empty for cohort at {adoption} (offset {offset}): {side}")]
    MissingReference { adoption: i64, offset: i64, side: String },

    /// Too few successful jackknife replicates to form a standard error.
    #[error("inference unavailable: {successful} successful replicate(s), need at least 2")]
    InferenceUnavailable { successful: usize },

    /// Panel and schedule (or two panels) disagree on the time mode.
    #[error("time mode mismatch: {0}")]
    TimeModeMismatch(String),

    /// Invalid simulation or run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A value that must be finite was not.
    #[error("non-finite value for {unit} at t={time}")]
    NonFinite { unit: UnitId, time: i64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
