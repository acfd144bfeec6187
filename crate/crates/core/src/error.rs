use alloc::string::String;

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("need at least one calibration score (n = 0)")]
    EmptyCalibration,
    #[error("need at least one test score (m = 0)")]
    EmptyTest,
    #[error("score {index} is not finite ({value})")]
    NonFiniteScore { index: usize, value: f64 },
    #[error("scores contain ties; call break_ties first")]
    TiesPresent,
    #[error("ties cannot be resolved: {0}")]
    TieUnresolvable(String),
    #[error("rank {rank} outside 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error("histogram bins sum to {sum}, expected {expected}")]
    HistogramSum { sum: usize, expected: usize },
    #[error("{name} = {value} outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("need at least {min} Monte-Carlo replicates, got {reps}")]
    TooFewReplicates { reps: usize, min: usize },
    #[error("empty index set K")]
    EmptyKSet,
    #[error("invalid index set K: {0}")]
    InvalidKSet(String),
    #[error("enumeration size n + m = {size} exceeds the limit {limit}")]
    SizeGuard { size: usize, limit: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "(0, 1)",
        })
    }
}

pub(crate) fn check_closed_unit(name: &'static str, value: f64) -> Result<()> {
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
