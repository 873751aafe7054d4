//! Lookback windows before measurement dates and the covariates summarized
//! from them.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::fmt_f64;
use crate::error::{Result, SequenceError};
use crate::sequence::RefSequence;
use crate::window::{add_days, DateWindow};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LookbackOutcome {
    Window { window: DateWindow, slice: RefSequence },
    /// The window or the measurement date falls outside the sequence.
    Flagged(SequenceError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lookback {
    pub measurement_date: NaiveDate,
    pub outcome: LookbackOutcome,
}

impl Lookback {
    pub fn window(&self) -> Option<&DateWindow> {
        match &self.outcome {
            LookbackOutcome::Window { window, .. } => Some(window),
            LookbackOutcome::Flagged(_) => None,
        }
    }
}

/// For each date `t`, the `width` days `[t - width, t - 1]` sliced from
/// `seq`. The measurement day itself is excluded. Dates whose window does
/// not fit are flagged in place.
pub fn lookback_windows(
    measurement_dates: &[NaiveDate],
    width: u32,
    seq: &RefSequence,
) -> Result<Vec<Lookback>> {
    if width == 0 {
        return Err(SequenceError::Parameter("lookback width must be at least 1 day".into()));
    }
    Ok(measurement_dates
        .iter()
        .map(|&t| {
            let outcome = (|| {
                seq.position_of(t)?;
                let window = DateWindow::ending_at(add_days(t, -1)?, width)?;
                let slice = seq.slice(&window)?;
                Ok(LookbackOutcome::Window { window, slice })
            })()
            .unwrap_or_else(LookbackOutcome::Flagged);
            Lookback { measurement_date: t, outcome }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateSummary {
    /// Days on medication in the window.
    Count,
    /// Days on medication divided by the window width.
    Fraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateRow {
    pub measurement_date: NaiveDate,
    pub sequence: String,
    pub window: Option<DateWindow>,
    pub value: Option<f64>,
    /// Reason the cell has no value.
    pub flag: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CovariateTable {
    pub rows: Vec<CovariateRow>,
}

impl CovariateTable {
    /// Long-format CSV; `key` columns are prepended to every row (for
    /// example a patient id).
    pub fn write_csv<W: Write>(&self, out: W, key: Option<(&str, &str)>) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        write_covariate_header(&mut w, key.map(|(name, _)| name))?;
        write_covariate_rows(&mut w, self, key.map(|(_, value)| value))?;
        w.flush()
    }
}

pub(crate) fn write_covariate_header<W: Write>(
    w: &mut csv::Writer<W>,
    key: Option<&str>,
) -> std::io::Result<()> {
    let mut header: Vec<&str> = key.into_iter().collect();
    header.extend(["measurement_date", "sequence", "window_start", "window_end", "value", "flag"]);
    w.write_record(&header)?;
    Ok(())
}

pub(crate) fn write_covariate_rows<W: Write>(
    w: &mut csv::Writer<W>,
    table: &CovariateTable,
    key: Option<&str>,
) -> std::io::Result<()> {
    for r in &table.rows {
        let mut rec: Vec<String> = key.map(str::to_string).into_iter().collect();
        rec.extend([
            r.measurement_date.to_string(),
            r.sequence.clone(),
            r.window.map(|w| w.start().to_string()).unwrap_or_default(),
            r.window.map(|w| w.end().to_string()).unwrap_or_default(),
            r.value.map(fmt_f64).unwrap_or_default(),
            r.flag.clone().unwrap_or_default(),
        ]);
        w.write_record(&rec)?;
    }
    Ok(())
}

/// Exposure summary in the lookback window of each measurement date, for
/// each named binary sequence. Rows are ordered by date, then by the order
/// of `seqs`.
pub fn time_varying_covariates(
    measurement_dates: &[NaiveDate],
    seqs: &[(&str, &RefSequence)],
    width: u32,
    summary: CovariateSummary,
) -> Result<CovariateTable> {
    let mut columns = Vec::with_capacity(seqs.len());
    for &(name, seq) in seqs {
        seq.require_binary()?;
        columns.push((name, lookback_windows(measurement_dates, width, seq)?));
    }
    let mut table = CovariateTable::default();
    for i in 0..measurement_dates.len() {
        for (name, lookbacks) in &columns {
            let lb = &lookbacks[i];
            let row = match &lb.outcome {
                LookbackOutcome::Window { window, slice } => {
                    let ones = slice.count_ones(&slice.coverage())? as f64;
                    let value = match summary {
                        CovariateSummary::Count => ones,
                        CovariateSummary::Fraction => ones / f64::from(width),
                    };
                    CovariateRow {
                        measurement_date: lb.measurement_date,
                        sequence: name.to_string(),
                        window: Some(*window),
                        value: Some(value),
                        flag: None,
                    }
                }
                LookbackOutcome::Flagged(e) => CovariateRow {
                    measurement_date: lb.measurement_date,
                    sequence: name.to_string(),
                    window: None,
                    value: None,
                    flag: Some(e.to_string()),
                },
            };
            table.rows.push(row);
        }
    }
    Ok(table)
}
