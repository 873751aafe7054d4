//! Cohort trend tables of mean comorbidity index and median utilization.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cci::{cci, utilization, CciWeights};
use super::fmt_f64;
use crate::block::SequenceBlock;
use crate::codes::InfoKind;
use crate::error::{Result, SequenceError};
use crate::window::{add_days, DateWindow};
use crate::PatientId;

/// One patient's comorbidity and setting blocks with their cohort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientHistory {
    pub patient_id: PatientId,
    /// Year of the patient's earliest health record.
    pub cohort: i32,
    pub comorbidity: SequenceBlock,
    pub setting: SequenceBlock,
}

impl PatientHistory {
    /// Cohort is the year of the earliest recorded diagnosis, or of the
    /// block start when nothing is recorded.
    pub fn new(comorbidity: SequenceBlock, setting: SequenceBlock) -> Result<Self> {
        let first = comorbidity
            .event_dates(&comorbidity.coverage())?
            .first()
            .copied()
            .unwrap_or(comorbidity.reference_date());
        Self::with_cohort(comorbidity, setting, first.year())
    }

    pub fn with_cohort(comorbidity: SequenceBlock, setting: SequenceBlock, cohort: i32) -> Result<Self> {
        if comorbidity.kind() != InfoKind::Comorbidity || setting.kind() != InfoKind::Setting {
            return Err(SequenceError::Parameter(
                "history needs a comorbidity block and a setting block".into(),
            ));
        }
        if comorbidity.patient_id() != setting.patient_id()
            || comorbidity.coverage() != setting.coverage()
        {
            return Err(SequenceError::Alignment(
                "comorbidity and setting blocks must share patient and coverage".into(),
            ));
        }
        Ok(Self {
            patient_id: comorbidity.patient_id().to_string(),
            cohort,
            comorbidity,
            setting,
        })
    }

    pub fn start_date(&self) -> NaiveDate {
        self.comorbidity.reference_date()
    }

    pub fn coverage(&self) -> DateWindow {
        self.comorbidity.coverage()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowingWindowParams {
    pub min_len: u32,
    pub max_len: u32,
    pub step: u32,
}

impl Default for GrowingWindowParams {
    fn default() -> Self {
        Self { min_len: 365, max_len: 3195, step: 91 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedWindowParams {
    pub window_len: u32,
    /// Days between report dates.
    pub step: u32,
    /// Last report date considered; defaults to the latest coverage end in
    /// each cohort.
    pub until: Option<NaiveDate>,
}

impl Default for FixedWindowParams {
    fn default() -> Self {
        Self { window_len: 365, step: 91, until: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub cohort: i32,
    pub report_index: usize,
    pub window_len: u32,
    /// Report date closing the window; absent for patient-anchored windows.
    pub report_date: Option<NaiveDate>,
    pub mean_cci: f64,
    pub median_utilization: f64,
    pub patients: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrendTable {
    pub rows: Vec<TrendRow>,
}

impl TrendTable {
    pub fn cohort(&self, cohort: i32) -> impl Iterator<Item = &TrendRow> {
        self.rows.iter().filter(move |r| r.cohort == cohort)
    }

    /// Long-format CSV, one row per (cohort, report) cell.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "cohort",
            "report_index",
            "window_len",
            "report_date",
            "mean_cci",
            "median_utilization",
            "patients",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.cohort.to_string(),
                r.report_index.to_string(),
                r.window_len.to_string(),
                r.report_date.map(|d| d.to_string()).unwrap_or_default(),
                fmt_f64(r.mean_cci),
                fmt_f64(r.median_utilization),
                r.patients.to_string(),
            ])?;
        }
        w.flush()
    }
}

fn validate_step(step: u32, min_len: u32) -> Result<()> {
    if step == 0 || min_len == 0 {
        return Err(SequenceError::Parameter("window length and step must be at least 1".into()));
    }
    Ok(())
}

fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

fn by_cohort(patients: &[PatientHistory]) -> BTreeMap<i32, Vec<&PatientHistory>> {
    let mut out: BTreeMap<i32, Vec<&PatientHistory>> = BTreeMap::new();
    for p in patients {
        out.entry(p.cohort).or_default().push(p);
    }
    out
}

/// Aggregates per-patient `(cci, utilization)` over the covered patients.
fn summarize(
    members: &[&PatientHistory],
    window_for: impl Fn(&PatientHistory) -> Result<Option<DateWindow>> + Sync,
    weights: &CciWeights,
) -> Result<Option<(f64, f64, usize)>> {
    let cells: Vec<(u32, usize)> = members
        .par_iter()
        .map(|p| -> Result<Option<(u32, usize)>> {
            match window_for(p)? {
                Some(w) if p.coverage().contains_window(&w) => {
                    Ok(Some((cci(&p.comorbidity, &w, weights)?, utilization(&p.setting, &w)?)))
                }
                _ => Ok(None),
            }
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if cells.is_empty() {
        return Ok(None);
    }
    let mean = cells.iter().map(|&(c, _)| f64::from(c)).sum::<f64>() / cells.len() as f64;
    let mut util: Vec<usize> = cells.iter().map(|&(_, u)| u).collect();
    Ok(Some((mean, median(&mut util), cells.len())))
}

/// Mean index over windows `[start, start + len - 1]` anchored at each
/// patient's start date, for `len` from `min_len` to `max_len` by `step`.
/// A patient counts toward a cell only when the window fits their coverage;
/// cells with no patients are omitted.
pub fn growing_window_trend(
    patients: &[PatientHistory],
    params: &GrowingWindowParams,
    weights: &CciWeights,
) -> Result<TrendTable> {
    validate_step(params.step, params.min_len)?;
    let mut table = TrendTable::default();
    for (cohort, members) in by_cohort(patients) {
        let lengths = (params.min_len..=params.max_len).step_by(params.step as usize);
        for (report_index, len) in lengths.enumerate() {
            let window_for = |p: &PatientHistory| DateWindow::starting_at(p.start_date(), len).map(Some);
            if let Some((mean_cci, median_utilization, n)) = summarize(&members, window_for, weights)? {
                table.rows.push(TrendRow {
                    cohort,
                    report_index,
                    window_len: len,
                    report_date: None,
                    mean_cci,
                    median_utilization,
                    patients: n,
                });
            }
        }
    }
    Ok(table)
}

/// Mean index and median utilization over the `window_len` days ending at
/// each report date. Report dates for a cohort start at the end of its
/// first full window after January 1 of the cohort year and advance by
/// `step` days. A patient counts once the report date is inside their
/// coverage; for patients who joined less than `window_len` days earlier,
/// the window is clipped to their start.
pub fn fixed_window_trend(
    patients: &[PatientHistory],
    params: &FixedWindowParams,
    weights: &CciWeights,
) -> Result<TrendTable> {
    validate_step(params.step, params.window_len)?;
    let mut table = TrendTable::default();
    for (cohort, members) in by_cohort(patients) {
        let anchor = NaiveDate::from_ymd_opt(cohort, 1, 1)
            .ok_or_else(|| SequenceError::Parameter(format!("cohort year {cohort} out of range")))?;
        let last = match params.until {
            Some(d) => d,
            None => members.iter().map(|p| p.coverage().end()).max().expect("cohort non-empty"),
        };
        let mut report_index = 0;
        let mut report = add_days(anchor, i64::from(params.window_len) - 1)?;
        while report <= last {
            let window = DateWindow::ending_at(report, params.window_len)?;
            let window_for = |p: &PatientHistory| {
                let cov = p.coverage();
                Ok(if cov.contains(report) { window.intersect(&cov) } else { None })
            };
            if let Some((mean_cci, median_utilization, n)) = summarize(&members, window_for, weights)? {
                table.rows.push(TrendRow {
                    cohort,
                    report_index,
                    window_len: params.window_len,
                    report_date: Some(report),
                    mean_cci,
                    median_utilization,
                    patients: n,
                });
            }
            report_index += 1;
            report = add_days(report, i64::from(params.step))?;
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{CareSetting, Comorbidity};
    use crate::ingest::{build_comorbidity_block, DiagnosisEvent};

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn history(id: &str, start: NaiveDate, end: NaiveDate, dx: &[(NaiveDate, Comorbidity)]) -> PatientHistory {
        let events: Vec<_> = dx
            .iter()
            .map(|&(date, category)| DiagnosisEvent {
                patient_id: id.into(),
                diagnosis_date: date,
                category,
                setting: CareSetting::Outpatient,
            })
            .collect();
        let b = build_comorbidity_block(id, &events, start, end).unwrap();
        PatientHistory::new(b.comorbidity, b.setting).unwrap()
    }

    #[test]
    fn single_early_diagnosis_gives_flat_growing_trend() {
        let p = history("a", d(2007, 1, 1), d(2016, 12, 31), &[(d(2007, 1, 1), Comorbidity::RenalDisease)]);
        let t = growing_window_trend(std::slice::from_ref(&p), &GrowingWindowParams::default(), &CciWeights::default())
            .unwrap();
        assert_eq!(t.rows.len(), 32);
        assert!(t.rows.iter().all(|r| r.mean_cci == 2.0 && r.patients == 1));
        assert_eq!(t.rows.last().unwrap().window_len, 365 + 31 * 91);
        let first = DateWindow::starting_at(p.start_date(), 365).unwrap();
        assert_eq!(t.rows[0].mean_cci, f64::from(cci(&p.comorbidity, &first, &CciWeights::default()).unwrap()));
    }

    #[test]
    fn growing_rows_omit_uncovered_lengths() {
        let p = history("a", d(2007, 1, 1), d(2008, 12, 31), &[]);
        let t = growing_window_trend(&[p], &GrowingWindowParams::default(), &CciWeights::default()).unwrap();
        // 731 days of coverage fits lengths 365, 456, 547, 638, 729
        assert_eq!(t.rows.len(), 5);
    }

    #[test]
    fn fixed_window_drops_old_diagnoses() {
        let p = history("a", d(2007, 1, 1), d(2010, 12, 31), &[(d(2007, 2, 1), Comorbidity::Dementia)]);
        assert_eq!(p.cohort, 2007);
        let t = fixed_window_trend(std::slice::from_ref(&p), &FixedWindowParams::default(), &CciWeights::default())
            .unwrap();
        let first = &t.rows[0];
        assert_eq!(first.report_date, Some(d(2007, 12, 31)));
        assert_eq!(first.mean_cci, 1.0);
        assert_eq!(first.median_utilization, 1.0);
        let later = t.rows.iter().find(|r| r.report_date.unwrap() > d(2008, 3, 1)).unwrap();
        assert_eq!(later.mean_cci, 0.0);
        let w = DateWindow::ending_at(later.report_date.unwrap(), 365).unwrap();
        assert_eq!(later.median_utilization, utilization(&p.setting, &w).unwrap() as f64);
    }

    #[test]
    fn fixed_window_clips_to_late_starters() {
        let early = history("a", d(2007, 1, 1), d(2009, 12, 31), &[(d(2007, 3, 1), Comorbidity::Dementia)]);
        let late = history("b", d(2007, 6, 1), d(2009, 12, 31), &[(d(2007, 6, 1), Comorbidity::AidsHiv)]);
        let t = fixed_window_trend(&[early, late.clone()], &FixedWindowParams::default(), &CciWeights::default())
            .unwrap();
        assert_eq!(t.rows[0].patients, 2);
        assert_eq!(t.rows[0].mean_cci, 3.5);
        let params = FixedWindowParams { until: Some(d(2007, 12, 31)), ..Default::default() };
        let only_late = fixed_window_trend(&[late], &params, &CciWeights::default()).unwrap();
        assert_eq!(only_late.rows.len(), 1);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3, 1, 2]), 2.0);
        assert_eq!(median(&mut [4, 1, 3, 2]), 2.5);
    }

    #[test]
    fn csv_is_long_format() {
        let p = history("a", d(2007, 1, 1), d(2008, 12, 31), &[]);
        let t = fixed_window_trend(&[p], &FixedWindowParams::default(), &CciWeights::default()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "cohort,report_index,window_len,report_date,mean_cci,median_utilization,patients");
        assert_eq!(lines.next().unwrap(), "2007,0,365,2007-12-31,0.000000,0.000000,1");
        assert_eq!(text.lines().count(), 1 + t.rows.len());
    }
}
