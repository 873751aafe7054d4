//! Referenced daily-state sequences for clinical event data.
//!
//! Time-stamped transactional records (prescription fills, diagnoses) are
//! compiled once into per-patient strings of daily states anchored to a
//! reference date. Every position `k` of a sequence maps to the calendar
//! date `reference_date + (k - 1)` and every symbol maps to a clinical state,
//! so analysis variables that depend on the timing of several records
//! (cohort eligibility, comorbidity index over a window, utilization,
//! time-varying covariates) reduce to slicing and counting.
//!
//! ```
//! use chrono::NaiveDate;
//! use tiavseq::{RefSequence, DateWindow};
//!
//! let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
//! let seq = RefSequence::binary("p1", d(2007, 1, 1), "0000000001111111100011111").unwrap();
//! assert_eq!(seq.date_at(32).is_err(), true);
//! assert_eq!(seq.position_of(d(2007, 1, 10)).unwrap(), 10);
//! assert_eq!(seq.count_symbol(b'1', &seq.coverage()).unwrap(), 13);
//! let runs = seq.to_runs().unwrap();
//! assert_eq!(runs.runs(), &[(10, 8), (21, 5)]);
//! # let _ = DateWindow::new(d(2007, 1, 1), d(2007, 1, 2));
//! ```
//!
//! Module map:
//!
//! - [`sequence`], [`window`], [`block`], [`codes`]: sequence values and the
//!   time/state functions.
//! - [`ingest`]: event file parsing and compilation into sequences.
//! - [`tiav`]: derived analysis variables.
//! - [`store`]: text persistence and footprint statistics.
//! - [`synth`]: seeded synthetic cohorts.
//! - [`cli`]: the batch front end behind the `tiavseq` binary.

pub mod block;
pub mod cli;
pub mod codes;
pub mod error;
pub mod ingest;
pub mod sequence;
pub mod store;
pub mod synth;
pub mod tiav;
pub mod window;

pub use block::SequenceBlock;
pub use codes::{CareSetting, ClinicalState, Comorbidity, InfoKind};
pub use error::SequenceError;
pub use sequence::{RefSequence, RunSequence, WindowMax};
pub use window::DateWindow;

/// Opaque patient identifier.
pub type PatientId = String;
