//! Header-bearing comma-delimited event files with ISO 8601 dates.
//!
//! Rows that break a field invariant are rejected into the report with
//! their line number; a date that cannot be parsed at all, an unreadable
//! file or a header without the required columns stops ingestion.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::report::IngestReport;
use super::IngestError;
use crate::codes::{CareSetting, Comorbidity};
use crate::window::DateWindow;
use crate::PatientId;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrescriptionEvent {
    pub patient_id: PatientId,
    pub medication_id: String,
    pub release_date: NaiveDate,
    pub days_supply: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosisCode {
    /// Raw diagnosis code awaiting a [`super::CodeMapping`].
    Raw(String),
    /// Already-mapped comorbidity category.
    Category(Comorbidity),
}

/// Diagnosis row as read from file, before code mapping.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawDiagnosis {
    pub patient_id: PatientId,
    pub diagnosis_date: NaiveDate,
    pub code: DiagnosisCode,
    pub setting: CareSetting,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiagnosisEvent {
    pub patient_id: PatientId,
    pub diagnosis_date: NaiveDate,
    pub category: Comorbidity,
    pub setting: CareSetting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventSchema {
    Prescription,
    Diagnosis,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOptions {
    /// Dates outside this window are rejected as implausible.
    pub plausible: DateWindow,
}

impl Default for ParseOptions {
    fn default() -> Self {
        let from = NaiveDate::from_ymd_opt(1900, 1, 1).expect("valid");
        let to = NaiveDate::from_ymd_opt(2100, 12, 31).expect("valid");
        Self { plausible: DateWindow::new(from, to).expect("ordered") }
    }
}

/// Events grouped by patient plus the row-level report.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub by_patient: BTreeMap<PatientId, Vec<T>>,
    pub report: IngestReport,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Self { by_patient: BTreeMap::new(), report: IngestReport::default() }
    }
}

impl<T> Parsed<T> {
    pub fn event_count(&self) -> usize {
        self.by_patient.values().map(Vec::len).sum()
    }

    fn push(&mut self, patient_id: &str, event: T) {
        self.report.rows_accepted += 1;
        self.by_patient.entry(patient_id.to_string()).or_default().push(event);
    }
}

#[derive(Debug, Clone)]
pub enum ParsedEvents {
    Prescriptions(Parsed<PrescriptionEvent>),
    Diagnoses(Parsed<RawDiagnosis>),
}

impl ParsedEvents {
    pub fn report(&self) -> &IngestReport {
        match self {
            ParsedEvents::Prescriptions(p) => &p.report,
            ParsedEvents::Diagnoses(p) => &p.report,
        }
    }
}

pub fn parse_events(
    path: &Path,
    schema: EventSchema,
    opts: &ParseOptions,
) -> Result<ParsedEvents, IngestError> {
    Ok(match schema {
        EventSchema::Prescription => ParsedEvents::Prescriptions(parse_prescriptions(path, opts)?),
        EventSchema::Diagnosis => ParsedEvents::Diagnoses(parse_diagnoses(path, opts)?),
    })
}

pub fn parse_prescriptions(
    path: &Path,
    opts: &ParseOptions,
) -> Result<Parsed<PrescriptionEvent>, IngestError> {
    parse_prescriptions_from(open(path)?, &path.display().to_string(), opts)
}

pub fn parse_diagnoses(
    path: &Path,
    opts: &ParseOptions,
) -> Result<Parsed<RawDiagnosis>, IngestError> {
    parse_diagnoses_from(open(path)?, &path.display().to_string(), opts)
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

/// Column positions resolved from a header row.
struct Columns<'a> {
    source: &'a str,
    header: Vec<String>,
}

impl<'a> Columns<'a> {
    fn read<R: Read>(rdr: &mut csv::Reader<R>, source: &'a str) -> Result<Self, IngestError> {
        let header = rdr
            .headers()
            .map_err(|e| csv_error(source, e))?
            .iter()
            .map(|h| h.trim().to_ascii_lowercase())
            .collect();
        Ok(Self { source, header })
    }

    fn find(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn require(&self, names: &[&str]) -> Result<Vec<usize>, IngestError> {
        let missing: Vec<String> =
            names.iter().filter(|n| self.find(n).is_none()).map(|n| n.to_string()).collect();
        if !missing.is_empty() {
            return Err(IngestError::Header {
                source_name: self.source.to_string(),
                found: self.header.clone(),
                missing,
            });
        }
        Ok(names.iter().map(|n| self.find(n).expect("checked")).collect())
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn csv_error(source: &str, e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    IngestError::Csv { source_name: source.to_string(), line, message: e.to_string() }
}

fn parse_date(
    source: &str,
    line: u64,
    column: &'static str,
    value: &str,
) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(value, "%Y-%m-%d").map_err(|_| IngestError::Date {
        source_name: source.to_string(),
        line,
        column,
        value: value.to_string(),
    })
}

/// Iterates data rows, handing each well-shaped row to `row_fn`. Rows with
/// the wrong field count are rejected here.
fn for_each_row<R: Read>(
    rdr: &mut csv::Reader<R>,
    source: &str,
    width: usize,
    report: &mut IngestReport,
    mut row_fn: impl FnMut(u64, &csv::StringRecord, &mut IngestReport) -> Result<(), IngestError>,
) -> Result<(), IngestError> {
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(source, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        report.rows_total += 1;
        if record.len() != width {
            let text = record.iter().collect::<Vec<_>>().join(",");
            report.reject(source, line, format!("expected {width} fields, found {}", record.len()), text);
            continue;
        }
        row_fn(line, &record, report)?;
    }
    Ok(())
}

pub fn parse_prescriptions_from<R: Read>(
    input: R,
    source: &str,
    opts: &ParseOptions,
) -> Result<Parsed<PrescriptionEvent>, IngestError> {
    let mut rdr = reader(input);
    let cols = Columns::read(&mut rdr, source)?;
    let idx = cols.require(&["patient_id", "medication_id", "release_date", "days_supply"])?;
    let width = cols.header.len();
    let mut parsed = Parsed::default();
    let mut events = Vec::new();
    for_each_row(&mut rdr, source, width, &mut parsed.report, |line, rec, report| {
        let text = rec.iter().collect::<Vec<_>>().join(",");
        let (patient, med) = (&rec[idx[0]], &rec[idx[1]]);
        if patient.is_empty() || med.is_empty() {
            report.reject(source, line, "empty patient_id or medication_id", text);
            return Ok(());
        }
        let release_date = parse_date(source, line, "release_date", &rec[idx[2]])?;
        if !opts.plausible.contains(release_date) {
            report.reject(source, line, format!("release_date outside {}", opts.plausible), text);
            return Ok(());
        }
        let days_supply = match rec[idx[3]].parse::<u32>() {
            Ok(n) if n >= 1 => n,
            _ => {
                report.reject(source, line, "days_supply must be an integer >= 1", text);
                return Ok(());
            }
        };
        events.push(PrescriptionEvent {
            patient_id: patient.to_string(),
            medication_id: med.to_string(),
            release_date,
            days_supply,
        });
        Ok(())
    })?;
    for e in events {
        let id = e.patient_id.clone();
        parsed.push(&id, e);
    }
    Ok(parsed)
}

pub fn parse_diagnoses_from<R: Read>(
    input: R,
    source: &str,
    opts: &ParseOptions,
) -> Result<Parsed<RawDiagnosis>, IngestError> {
    let mut rdr = reader(input);
    let cols = Columns::read(&mut rdr, source)?;
    let base = cols.require(&["patient_id", "diagnosis_date", "setting"])?;
    let (code_idx, premapped) = match (cols.find("category"), cols.find("code")) {
        (Some(i), _) => (i, true),
        (None, Some(i)) => (i, false),
        (None, None) => {
            return Err(IngestError::Header {
                source_name: source.to_string(),
                found: cols.header.clone(),
                missing: vec!["code or category".into()],
            })
        }
    };
    let width = cols.header.len();
    let mut parsed = Parsed::default();
    let mut events = Vec::new();
    for_each_row(&mut rdr, source, width, &mut parsed.report, |line, rec, report| {
        let text = rec.iter().collect::<Vec<_>>().join(",");
        let patient = &rec[base[0]];
        if patient.is_empty() {
            report.reject(source, line, "empty patient_id", text);
            return Ok(());
        }
        let diagnosis_date = parse_date(source, line, "diagnosis_date", &rec[base[1]])?;
        if !opts.plausible.contains(diagnosis_date) {
            report.reject(source, line, format!("diagnosis_date outside {}", opts.plausible), text);
            return Ok(());
        }
        let setting = match rec[base[2]].as_bytes() {
            [s] => CareSetting::from_symbol(*s),
            _ => None,
        };
        let Some(setting) = setting else {
            report.reject(source, line, "setting must be I or O", text);
            return Ok(());
        };
        let raw = &rec[code_idx];
        let code = if premapped {
            match raw.as_bytes() {
                [s] if Comorbidity::from_symbol(*s).is_some() => {
                    DiagnosisCode::Category(Comorbidity::from_symbol(*s).expect("checked"))
                }
                _ => {
                    report.reject(source, line, "category must be one of 1-9, A-H", text);
                    return Ok(());
                }
            }
        } else if raw.is_empty() {
            report.reject(source, line, "empty diagnosis code", text);
            return Ok(());
        } else {
            DiagnosisCode::Raw(raw.to_string())
        };
        events.push(RawDiagnosis { patient_id: patient.to_string(), diagnosis_date, code, setting });
        Ok(())
    })?;
    for e in events {
        let id = e.patient_id.clone();
        parsed.push(&id, e);
    }
    Ok(parsed)
}

/// `patient_id,first_data_date` table.
pub fn parse_first_data_dates(path: &Path) -> Result<BTreeMap<PatientId, NaiveDate>, IngestError> {
    let source = path.display().to_string();
    let mut rdr = reader(open(path)?);
    let cols = Columns::read(&mut rdr, &source)?;
    let idx = cols.require(&["patient_id", "first_data_date"])?;
    let mut out = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(&source, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let (Some(id), Some(date)) = (record.get(idx[0]), record.get(idx[1])) else {
            return Err(IngestError::Csv {
                source_name: source.clone(),
                line,
                message: "missing field".into(),
            });
        };
        out.insert(id.to_string(), parse_date(&source, line, "first_data_date", date)?);
    }
    Ok(out)
}
