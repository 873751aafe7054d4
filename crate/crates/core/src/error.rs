use chrono::NaiveDate;
use thiserror::Error;

use crate::codes::InfoKind;

/// Errors raised by sequence, window and block operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("position {position} outside 1..={len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("date {date} precedes coverage start {start}")]
    BeforeCoverage { date: NaiveDate, start: NaiveDate },
    #[error("date {date} follows coverage end {end}")]
    AfterCoverage { date: NaiveDate, end: NaiveDate },
    #[error("window start {start} is after window end {end}")]
    InvertedWindow { start: NaiveDate, end: NaiveDate },
    #[error("symbol {symbol:?} is not in the {kind} alphabet")]
    InvalidSymbol { symbol: char, kind: InfoKind },
    #[error("expected a {expected} sequence, got {found}")]
    KindMismatch { expected: InfoKind, found: InfoKind },
    #[error("alignment: {0}")]
    Alignment(String),
    #[error("parameter: {0}")]
    Parameter(String),
    #[error("structure: {0}")]
    Structure(String),
    #[error("empty payload: sequences cover at least one day")]
    EmptyPayload,
    #[error("date arithmetic overflow")]
    DateOverflow,
}

pub type Result<T, E = SequenceError> = std::result::Result<T, E>;
