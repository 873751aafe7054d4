use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SequenceError};
use crate::sequence::{overlap_and, RefSequence};
use crate::window::{add_days, DateWindow};

/// Length of the pre- and post-index periods. Fixed day spans, not calendar years.
pub const YEAR_DAYS: i64 = 365;

/// Thresholds for the four inclusion criteria around an index date.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityParams {
    /// Minimum days without the augmenting medication in the pre-index year.
    pub x: u32,
    /// Minimum days on the augmenting medication within some `z`-day window
    /// of the post-index year.
    pub y: u32,
    pub z: u32,
    /// Minimum first-line days in the pre-index year.
    pub w1: u32,
    /// Minimum first-line days in the post-index year.
    pub w2: u32,
    /// Minimum days on both medications in the post-index year.
    pub u: u32,
}

impl EligibilityParams {
    pub fn validate(&self) -> Result<()> {
        let year = YEAR_DAYS as u32;
        let mut bad = Vec::new();
        if self.y > self.z {
            bad.push(format!("y ({}) exceeds z ({})", self.y, self.z));
        }
        for (name, v) in [("z", self.z), ("x", self.x), ("w1", self.w1), ("w2", self.w2), ("u", self.u)] {
            if v > year {
                bad.push(format!("{name} ({v}) exceeds {year}"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SequenceError::Parameter(bad.join("; ")))
        }
    }
}

/// Measured counts for one candidate index date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateEvaluation {
    pub index_date: NaiveDate,
    pub free_days_pre: usize,
    pub max_on_in_window: usize,
    pub firstline_pre: usize,
    pub firstline_post: usize,
    pub overlap_post: usize,
    /// Criteria 1 through 4.
    pub passed: [bool; 4],
}

impl CandidateEvaluation {
    pub fn all_passed(&self) -> bool {
        self.passed.iter().all(|&p| p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityResult {
    pub eligible: bool,
    pub index_date: Option<NaiveDate>,
    /// The passing candidate when eligible; otherwise the earliest candidate
    /// with full two-year coverage, if any.
    pub evaluation: Option<CandidateEvaluation>,
    /// Candidates with full two-year coverage that were tested.
    pub candidates_tested: usize,
}

/// Initiation dates: days on medication whose previous day is off or
/// uncovered.
pub fn candidate_index_dates(augmenting: &RefSequence) -> Result<Vec<NaiveDate>> {
    augmenting.require_binary()?;
    let p = augmenting.payload();
    (0..p.len())
        .filter(|&i| p[i] == b'1' && (i == 0 || p[i - 1] == b'0'))
        .map(|i| augmenting.date_at(i + 1))
        .collect()
}

/// Tests every initiation date in order and reports the earliest one that
/// meets all four criteria. The pre-index year is `[t-365, t-1]` and the
/// post-index year `[t, t+364]`; both must lie inside the sequences.
pub fn evaluate_eligibility(
    augmenting: &RefSequence,
    firstline: &RefSequence,
    params: &EligibilityParams,
) -> Result<EligibilityResult> {
    augmenting.require_binary()?;
    firstline.require_binary()?;
    params.validate()?;
    if augmenting.patient_id() != firstline.patient_id()
        || augmenting.coverage() != firstline.coverage()
    {
        return Err(SequenceError::Alignment(format!(
            "augmenting {}:{} and first-line {}:{} must share patient and coverage",
            augmenting.patient_id(),
            augmenting.coverage(),
            firstline.patient_id(),
            firstline.coverage()
        )));
    }
    let both = overlap_and(augmenting, firstline)?;
    let coverage = augmenting.coverage();

    let mut result = EligibilityResult {
        eligible: false,
        index_date: None,
        evaluation: None,
        candidates_tested: 0,
    };
    for t in candidate_index_dates(augmenting)? {
        let (Ok(pre_start), Ok(post_end)) = (add_days(t, -YEAR_DAYS), add_days(t, YEAR_DAYS - 1))
        else {
            continue;
        };
        if pre_start < coverage.start() || post_end > coverage.end() {
            continue;
        }
        let pre = DateWindow::new(pre_start, add_days(t, -1)?)?;
        let post = DateWindow::new(t, post_end)?;

        let free_days_pre = augmenting.count_symbol(b'0', &pre)?;
        let max_on_in_window = if params.z == 0 {
            0
        } else {
            augmenting.max_ones_in_window(params.z as usize, &post)?.count
        };
        let firstline_pre = firstline.count_ones(&pre)?;
        let firstline_post = firstline.count_ones(&post)?;
        let overlap_post = both.count_ones(&post)?;
        let eval = CandidateEvaluation {
            index_date: t,
            free_days_pre,
            max_on_in_window,
            firstline_pre,
            firstline_post,
            overlap_post,
            passed: [
                free_days_pre >= params.x as usize,
                max_on_in_window >= params.y as usize,
                firstline_pre >= params.w1 as usize && firstline_post >= params.w2 as usize,
                overlap_post >= params.u as usize,
            ],
        };
        result.candidates_tested += 1;
        if result.evaluation.is_none() {
            result.evaluation = Some(eval);
        }
        if eval.all_passed() {
            result.eligible = true;
            result.index_date = Some(t);
            result.evaluation = Some(eval);
            break;
        }
    }
    Ok(result)
}
