//! Event ingestion: parse transactional files and compile each patient's
//! records into referenced sequences.

mod diagnosis;
mod exposure;
mod mapping;
mod parse;
mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::NaiveDate;
use rayon::prelude::*;
use thiserror::Error;

use crate::block::SequenceBlock;
use crate::error::SequenceError;
use crate::sequence::RefSequence;
use crate::window::DateWindow;
use crate::PatientId;

pub use diagnosis::{build_comorbidity_block, comorbidity_start_date, ComorbidityBlocks};
pub use exposure::{build_exposure, ExposureBuild, StockpileOptions};
pub use mapping::{map_code, resolve_diagnoses, CodeMapping, UnknownCodePolicy};
pub use parse::{
    parse_diagnoses, parse_diagnoses_from, parse_events, parse_first_data_dates,
    parse_prescriptions, parse_prescriptions_from, DiagnosisCode, DiagnosisEvent, EventSchema,
    ParseOptions, Parsed, ParsedEvents, PrescriptionEvent, RawDiagnosis,
};
pub use report::{ExcludedPatient, IngestReport, RejectedRow};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}: header {found:?} lacks required columns {missing:?}")]
    Header { source_name: String, found: Vec<String>, missing: Vec<String> },
    #[error("{source_name}:{line}: cannot parse {column} {value:?} as a YYYY-MM-DD date")]
    Date { source_name: String, line: u64, column: &'static str, value: String },
    #[error("{source_name}:{line}: {message}")]
    Csv { source_name: String, line: u64, message: String },
    #[error("unknown diagnosis codes: {}", .0.join(", "))]
    UnknownCodes(Vec<String>),
    #[error("code mapping {source_name}:{line}: {message}")]
    Mapping { source_name: String, line: u64, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// The later of the study start and the date the patient's data first
/// becomes available.
pub fn resolve_reference_date(study_start: NaiveDate, first_data_date: NaiveDate) -> NaiveDate {
    study_start.max(first_data_date)
}

/// Where each patient's first pharmacy-data date comes from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum FirstDataSource {
    /// Earliest prescription release date in the patient's records.
    #[default]
    EarliestRelease,
    /// Explicit per-patient dates; patients absent from the table fall back
    /// to their earliest release.
    Table(BTreeMap<PatientId, NaiveDate>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub study_start: NaiveDate,
    pub study_end: NaiveDate,
    pub first_data: FirstDataSource,
    pub unknown_codes: UnknownCodePolicy,
    pub stockpile: StockpileOptions,
    pub parse: ParseOptions,
}

impl IngestConfig {
    pub fn new(study_start: NaiveDate, study_end: NaiveDate) -> Result<Self, IngestError> {
        if study_start > study_end {
            return Err(IngestError::Config(format!(
                "study start {study_start} is after study end {study_end}"
            )));
        }
        Ok(Self {
            study_start,
            study_end,
            first_data: FirstDataSource::default(),
            unknown_codes: UnknownCodePolicy::default(),
            stockpile: StockpileOptions::default(),
            parse: ParseOptions::default(),
        })
    }

    pub fn study_window(&self) -> DateWindow {
        DateWindow::new(self.study_start, self.study_end).expect("validated at construction")
    }

    /// Reference date for a patient, or `None` when their data starts after
    /// the study ends.
    pub fn reference_date_for(&self, first_data_date: NaiveDate) -> Option<NaiveDate> {
        (first_data_date <= self.study_end)
            .then(|| resolve_reference_date(self.study_start, first_data_date))
    }
}

/// Everything compiled for one patient.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatientSequences {
    /// Binary exposure per medication id.
    pub exposures: BTreeMap<String, RefSequence>,
    pub comorbidity: Option<SequenceBlock>,
    pub setting: Option<SequenceBlock>,
}

#[derive(Debug, Clone, Default)]
pub struct CompiledCohort {
    pub patients: BTreeMap<PatientId, PatientSequences>,
    pub report: IngestReport,
}

/// Compiles grouped events into sequences, one patient per task.
pub fn compile_cohort(
    prescriptions: &BTreeMap<PatientId, Vec<PrescriptionEvent>>,
    diagnoses: &BTreeMap<PatientId, Vec<DiagnosisEvent>>,
    config: &IngestConfig,
) -> Result<CompiledCohort, IngestError> {
    let mut ids: Vec<&PatientId> = prescriptions.keys().chain(diagnoses.keys()).collect();
    ids.sort();
    ids.dedup();

    let compiled: Vec<(PatientId, PatientSequences, IngestReport)> = ids
        .par_iter()
        .map(|&id| {
            let fills = prescriptions.get(id).map(Vec::as_slice).unwrap_or_default();
            let dx = diagnoses.get(id).map(Vec::as_slice).unwrap_or_default();
            compile_patient(id, fills, dx, config).map(|(seqs, report)| (id.clone(), seqs, report))
        })
        .collect::<Result<_, _>>()?;

    let mut cohort = CompiledCohort::default();
    for (id, seqs, report) in compiled {
        cohort.report.merge(report);
        if seqs != PatientSequences::default() {
            cohort.patients.insert(id, seqs);
        }
    }
    Ok(cohort)
}

fn compile_patient(
    id: &str,
    fills: &[PrescriptionEvent],
    dx: &[DiagnosisEvent],
    config: &IngestConfig,
) -> Result<(PatientSequences, IngestReport), IngestError> {
    let mut out = PatientSequences::default();
    let mut report = IngestReport::default();

    if !fills.is_empty() {
        let earliest = fills.iter().map(|f| f.release_date).min().expect("non-empty");
        let first_data = match &config.first_data {
            FirstDataSource::Table(t) => t.get(id).copied().unwrap_or(earliest),
            FirstDataSource::EarliestRelease => earliest,
        };
        match config.reference_date_for(first_data) {
            None => report.exclude(
                id,
                format!("pharmacy data starts {first_data}, after study end {}", config.study_end),
            ),
            Some(reference) => {
                let mut by_med: BTreeMap<&str, Vec<PrescriptionEvent>> = BTreeMap::new();
                for f in fills {
                    by_med.entry(&f.medication_id).or_default().push(f.clone());
                }
                for (med, med_fills) in by_med {
                    let built = build_exposure(
                        id,
                        &med_fills,
                        reference,
                        config.study_end,
                        &config.stockpile,
                    )?;
                    report.fills_after_end += built.fills_after_end;
                    out.exposures.insert(med.to_string(), built.sequence);
                }
            }
        }
    }

    if !dx.is_empty() {
        let start = comorbidity_start_date(dx, config.study_start);
        let blocks = build_comorbidity_block(id, dx, start, config.study_end)?;
        report.diagnoses_out_of_range += blocks.out_of_range;
        report.duplicate_diagnoses += blocks.duplicates;
        report.setting_conflicts += blocks.setting_conflicts;
        out.comorbidity = Some(blocks.comorbidity);
        out.setting = Some(blocks.setting);
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{CareSetting, Comorbidity};

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn reference_date_examples() {
        assert_eq!(resolve_reference_date(d(2007, 1, 1), d(2005, 3, 10)), d(2007, 1, 1));
        assert_eq!(resolve_reference_date(d(2007, 1, 1), d(2014, 6, 15)), d(2014, 6, 15));
        assert_eq!(resolve_reference_date(d(2009, 2, 2), d(2009, 2, 2)), d(2009, 2, 2));
        let cfg = IngestConfig::new(d(2007, 1, 1), d(2015, 12, 31)).unwrap();
        assert_eq!(cfg.reference_date_for(d(2016, 1, 1)), None);
        assert!(IngestConfig::new(d(2016, 1, 1), d(2015, 12, 31)).is_err());
    }

    #[test]
    fn compiles_exposures_and_blocks_per_patient() {
        let cfg = IngestConfig::new(d(2007, 1, 1), d(2015, 12, 31)).unwrap();
        let rx = |p: &str, m: &str, date, n| PrescriptionEvent {
            patient_id: p.into(),
            medication_id: m.into(),
            release_date: date,
            days_supply: n,
        };
        let mut prescriptions = BTreeMap::new();
        prescriptions.insert(
            "a".to_string(),
            vec![rx("a", "M1", d(2010, 7, 30), 30), rx("a", "M1", d(2010, 8, 25), 30)],
        );
        prescriptions.insert("late".to_string(), vec![rx("late", "M1", d(2016, 3, 1), 30)]);
        let mut diagnoses = BTreeMap::new();
        diagnoses.insert(
            "a".to_string(),
            vec![DiagnosisEvent {
                patient_id: "a".into(),
                diagnosis_date: d(2006, 5, 1),
                category: Comorbidity::Dementia,
                setting: CareSetting::Inpatient,
            }],
        );
        let cohort = compile_cohort(&prescriptions, &diagnoses, &cfg).unwrap();
        assert_eq!(cohort.patients.len(), 1);
        assert_eq!(cohort.report.excluded_patients.len(), 1);
        let a = &cohort.patients["a"];
        let m1 = &a.exposures["M1"];
        // first release after study start, so it becomes the reference date
        assert_eq!(m1.reference_date(), d(2010, 7, 30));
        assert_eq!(m1.count_ones(&m1.coverage()).unwrap(), 60);
        let block = a.comorbidity.as_ref().unwrap();
        assert_eq!(block.reference_date(), d(2006, 5, 1));
        assert_eq!(block.coverage().end(), d(2015, 12, 31));
    }
}
