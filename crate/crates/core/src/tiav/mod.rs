//! Time-interdependent analysis variables derived from sequences: cohort
//! eligibility around an index date, comorbidity index and utilization over
//! measurement windows, and lookback covariates.

mod cci;
mod covariates;
mod eligibility;
mod trend;

pub use cci::{cci, utilization, CciWeights};
pub(crate) use covariates::{write_covariate_header, write_covariate_rows};
pub use covariates::{
    lookback_windows, time_varying_covariates, CovariateRow, CovariateSummary, CovariateTable,
    Lookback, LookbackOutcome,
};
pub use eligibility::{
    candidate_index_dates, evaluate_eligibility, CandidateEvaluation, EligibilityParams,
    EligibilityResult, YEAR_DAYS,
};
pub use trend::{
    fixed_window_trend, growing_window_trend, FixedWindowParams, GrowingWindowParams,
    PatientHistory, TrendRow, TrendTable,
};

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}
