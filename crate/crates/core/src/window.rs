use std::fmt;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SequenceError};

/// Inclusive calendar window `[start, end]` at day precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DateWindow {
    start: NaiveDate,
    end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(SequenceError::InvertedWindow { start, end });
        }
        Ok(Self { start, end })
    }

    /// `width` days beginning at `start`.
    pub fn starting_at(start: NaiveDate, width: u32) -> Result<Self> {
        if width == 0 {
            return Err(SequenceError::Parameter("window width must be at least 1 day".into()));
        }
        let end = add_days(start, i64::from(width) - 1)?;
        Self::new(start, end)
    }

    /// `width` days ending at `end` (inclusive).
    pub fn ending_at(end: NaiveDate, width: u32) -> Result<Self> {
        if width == 0 {
            return Err(SequenceError::Parameter("window width must be at least 1 day".into()));
        }
        let start = add_days(end, -(i64::from(width) - 1))?;
        Self::new(start, end)
    }

    /// Single-day window.
    pub fn day(date: NaiveDate) -> Self {
        Self { start: date, end: date }
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    /// Width in days, counting both ends.
    pub fn width(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn contains_window(&self, other: &DateWindow) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn intersect(&self, other: &DateWindow) -> Option<DateWindow> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start <= end).then_some(DateWindow { start, end })
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        let end = self.end;
        self.start.iter_days().take_while(move |d| *d <= end)
    }
}

impl fmt::Display for DateWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Signed day offset with overflow reported as an error.
pub fn add_days(date: NaiveDate, days: i64) -> Result<NaiveDate> {
    let shifted = if days >= 0 {
        date.checked_add_days(Days::new(days as u64))
    } else {
        date.checked_sub_days(Days::new(days.unsigned_abs()))
    };
    shifted.ok_or(SequenceError::DateOverflow)
}
