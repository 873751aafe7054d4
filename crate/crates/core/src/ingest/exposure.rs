//! Prescription fills to daily exposure, carrying unused supply forward.

use chrono::NaiveDate;

use super::parse::PrescriptionEvent;
use crate::codes::InfoKind;
use crate::error::{Result, SequenceError};
use crate::sequence::RefSequence;
use crate::window::{add_days, DateWindow};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StockpileOptions {
    /// Upper bound on days of supply on hand after a fill. `None` stores
    /// any amount.
    pub cap: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExposureBuild {
    pub sequence: RefSequence,
    /// Fills released after the end date, ignored.
    pub fills_after_end: usize,
}

/// Builds the binary exposure sequence for one patient and medication over
/// `[reference_date, end_date]`.
///
/// Fills are applied in release order. A fill released while earlier supply
/// remains starts the day after that supply runs out, so an early refill
/// shifts its days forward instead of overlapping. Supply consumed before
/// `reference_date` is spent but not recorded.
pub fn build_exposure(
    patient_id: &str,
    fills: &[PrescriptionEvent],
    reference_date: NaiveDate,
    end_date: NaiveDate,
    options: &StockpileOptions,
) -> Result<ExposureBuild> {
    let coverage = DateWindow::new(reference_date, end_date)?;
    if options.cap == Some(0) {
        return Err(SequenceError::Parameter("stockpile cap must be at least 1 day".into()));
    }
    let mut ordered: Vec<&PrescriptionEvent> = fills.iter().collect();
    ordered.sort_by_key(|f| f.release_date);

    let mut payload = vec![b'0'; coverage.width()];
    let mut fills_after_end = 0;
    // last day covered by supply on hand
    let mut frontier: Option<NaiveDate> = None;
    for fill in ordered {
        if fill.release_date > end_date {
            fills_after_end += 1;
            continue;
        }
        let release = fill.release_date;
        let carried = match frontier {
            Some(f) if f >= release => (f - release).num_days() as u64 + 1,
            _ => 0,
        };
        let mut on_hand = carried + u64::from(fill.days_supply);
        if let Some(cap) = options.cap {
            on_hand = on_hand.min(u64::from(cap).max(carried));
        }
        let first_new = add_days(release, carried as i64)?;
        let last = add_days(release, on_hand as i64 - 1)?;
        frontier = Some(last);
        if first_new > last {
            continue;
        }
        let span = DateWindow::new(first_new, last)?;
        if let Some(visible) = span.intersect(&coverage) {
            let from = (visible.start() - reference_date).num_days() as usize;
            payload[from..from + visible.width()].fill(b'1');
        }
    }
    let sequence = RefSequence::new(patient_id, InfoKind::Exposure, reference_date, payload)?;
    Ok(ExposureBuild { sequence, fills_after_end })
}
