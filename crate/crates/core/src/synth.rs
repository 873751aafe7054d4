//! Seeded synthetic cohorts for tests, examples and the hidden `generate`
//! subcommand. The same parameters always give the same records.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codes::{CareSetting, Comorbidity};
use crate::ingest::{DiagnosisCode, PrescriptionEvent, RawDiagnosis};
use crate::window::add_days;
use crate::PatientId;

pub const FIRST_LINE: &str = "FL01";
pub const AUGMENTING: &str = "AUG01";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub patients_per_cohort: usize,
    /// Year of each cohort's earliest records.
    pub cohort_years: Vec<i32>,
    pub study_start: NaiveDate,
    pub study_end: NaiveDate,
    /// At most one extra visit during a patient's first year.
    pub sparse_first_year: bool,
    /// Visit dates per year after the first.
    pub visits_per_year: (u32, u32),
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 7,
            patients_per_cohort: 40,
            cohort_years: vec![2003, 2004, 2005],
            study_start: NaiveDate::from_ymd_opt(2006, 1, 1).expect("valid"),
            study_end: NaiveDate::from_ymd_opt(2015, 9, 30).expect("valid"),
            sparse_first_year: false,
            visits_per_year: (6, 14),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SyntheticData {
    pub prescriptions: Vec<PrescriptionEvent>,
    pub diagnoses: Vec<RawDiagnosis>,
    /// Raw code to category table covering every generated code.
    pub mapping: Vec<(String, Comorbidity)>,
}

/// Two raw codes per category, `X<symbol>0` and `X<symbol>1`.
pub fn code_table() -> Vec<(String, Comorbidity)> {
    Comorbidity::ALL
        .iter()
        .flat_map(|&c| (0..2).map(move |i| (format!("X{}{i}", c.symbol() as char), c)))
        .collect()
}

fn days_between(a: NaiveDate, b: NaiveDate) -> i64 {
    (b - a).num_days()
}

fn day_in(rng: &mut ChaCha8Rng, start: NaiveDate, end: NaiveDate) -> NaiveDate {
    let span = days_between(start, end).max(0);
    add_days(start, rng.gen_range(0..=span)).expect("inside generated range")
}

/// Cohorts of diagnoses accruing over time plus first-line and augmenting
/// prescriptions.
pub fn generate(params: &SynthParams) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut data = SyntheticData { mapping: code_table(), ..Default::default() };
    for &year in &params.cohort_years {
        for i in 0..params.patients_per_cohort {
            let id = format!("c{year}-{:04}", i + 1);
            diagnoses_for(&mut rng, &id, year, params, &mut data.diagnoses);
            prescriptions_for(&mut rng, &id, params, &mut data.prescriptions);
        }
    }
    sort(&mut data);
    data
}

fn diagnoses_for(
    rng: &mut ChaCha8Rng,
    id: &str,
    year: i32,
    params: &SynthParams,
    out: &mut Vec<RawDiagnosis>,
) {
    let jan1 = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year");
    let first = day_in(rng, jan1, add_days(jan1, 364).expect("valid"));
    let mut visits = BTreeSet::from([first]);
    let first_year_end = add_days(first, 364).expect("valid");
    let first_year_visits = if params.sparse_first_year {
        rng.gen_range(0..=1)
    } else {
        rng.gen_range(params.visits_per_year.0..=params.visits_per_year.1)
    };
    for _ in 0..first_year_visits {
        visits.insert(day_in(rng, first, first_year_end.min(params.study_end)));
    }
    let mut year_start = add_days(first_year_end, 1).expect("valid");
    while year_start <= params.study_end {
        let year_end = add_days(year_start, 364).expect("valid").min(params.study_end);
        for _ in 0..rng.gen_range(params.visits_per_year.0..=params.visits_per_year.1) {
            visits.insert(day_in(rng, year_start, year_end));
        }
        year_start = add_days(year_end, 1).expect("valid");
    }

    let mut acquired: Vec<Comorbidity> = vec![*Comorbidity::ALL.choose(rng).expect("non-empty")];
    for date in visits {
        if rng.gen_bool(0.08) {
            acquired.push(*Comorbidity::ALL.choose(rng).expect("non-empty"));
        }
        for _ in 0..rng.gen_range(1..=2) {
            let c = *acquired.choose(rng).expect("non-empty");
            let setting = if rng.gen_bool(0.15) { CareSetting::Inpatient } else { CareSetting::Outpatient };
            out.push(RawDiagnosis {
                patient_id: id.to_string(),
                diagnosis_date: date,
                code: DiagnosisCode::Raw(format!("X{}{}", c.symbol() as char, rng.gen_range(0..2))),
                setting,
            });
        }
    }
}

/// Refills with late and early arrivals around nominal supply.
fn fill_episode(
    rng: &mut ChaCha8Rng,
    id: &str,
    med: &str,
    start: NaiveDate,
    fills: usize,
    supplies: &[u32],
    out: &mut Vec<PrescriptionEvent>,
) -> NaiveDate {
    let mut release = start;
    for _ in 0..fills {
        let days_supply = *supplies.choose(rng).expect("non-empty");
        out.push(PrescriptionEvent {
            patient_id: id.to_string(),
            medication_id: med.to_string(),
            release_date: release,
            days_supply,
        });
        let offset = i64::from(days_supply) + rng.gen_range(-7..=25);
        release = add_days(release, offset.max(1)).expect("valid");
    }
    release
}

fn prescriptions_for(rng: &mut ChaCha8Rng, id: &str, params: &SynthParams, out: &mut Vec<PrescriptionEvent>) {
    let horizon = days_between(params.study_start, params.study_end).max(1);
    let fl_start = add_days(params.study_start, rng.gen_range(-200..=horizon / 3)).expect("valid");
    let fl_fills = rng.gen_range(4..=40);
    fill_episode(rng, id, FIRST_LINE, fl_start, fl_fills, &[30, 30, 90], out);

    if rng.gen_bool(0.7) {
        let mut start = add_days(fl_start, rng.gen_range(200..=900)).expect("valid");
        for _ in 0..rng.gen_range(1..=3) {
            if start > params.study_end {
                break;
            }
            let fills = rng.gen_range(1..=12);
            let end = fill_episode(rng, id, AUGMENTING, start, fills, &[30], out);
            start = add_days(end, rng.gen_range(60..=400)).expect("valid");
        }
    }
    out.retain(|f| f.release_date <= params.study_end);
}

/// Patients with a handful of short fills over a long horizon, so runs are
/// far fewer than days.
pub fn sparse_exposure_cohort(seed: u64, patients: usize, start: NaiveDate, end: NaiveDate) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = SyntheticData::default();
    for i in 0..patients {
        let id = format!("s{:05}", i + 1);
        data.prescriptions.push(PrescriptionEvent {
            patient_id: id.clone(),
            medication_id: FIRST_LINE.into(),
            release_date: start,
            days_supply: rng.gen_range(7..=30),
        });
        for _ in 0..rng.gen_range(1..=5) {
            data.prescriptions.push(PrescriptionEvent {
                patient_id: id.clone(),
                medication_id: FIRST_LINE.into(),
                release_date: day_in(&mut rng, start, end),
                days_supply: rng.gen_range(7..=30),
            });
        }
    }
    sort(&mut data);
    data
}

fn sort(data: &mut SyntheticData) {
    data.prescriptions.sort_by(|a, b| {
        (&a.patient_id, &a.medication_id, a.release_date, a.days_supply)
            .cmp(&(&b.patient_id, &b.medication_id, b.release_date, b.days_supply))
    });
    let code = |d: &RawDiagnosis| match &d.code {
        DiagnosisCode::Raw(s) => s.clone(),
        DiagnosisCode::Category(c) => (c.symbol() as char).to_string(),
    };
    data.diagnoses.sort_by(|a, b| {
        (&a.patient_id, a.diagnosis_date, code(a), a.setting.symbol())
            .cmp(&(&b.patient_id, b.diagnosis_date, code(b), b.setting.symbol()))
    });
}

impl SyntheticData {
    pub fn prescriptions_by_patient(&self) -> BTreeMap<PatientId, Vec<PrescriptionEvent>> {
        let mut out: BTreeMap<PatientId, Vec<PrescriptionEvent>> = BTreeMap::new();
        for p in &self.prescriptions {
            out.entry(p.patient_id.clone()).or_default().push(p.clone());
        }
        out
    }

    pub fn cohort_of(&self, patient_id: &str) -> Option<i32> {
        self.diagnoses
            .iter()
            .filter(|d| d.patient_id == patient_id)
            .map(|d| d.diagnosis_date.year())
            .min()
    }

    /// Writes `prescriptions.csv`, `diagnoses.csv` and `code_map.csv` into
    /// `dir`. Empty tables are still written with their headers.
    pub fn write_csv(&self, dir: &Path) -> std::io::Result<FixturePaths> {
        fs::create_dir_all(dir)?;
        let paths = FixturePaths {
            prescriptions: dir.join("prescriptions.csv"),
            diagnoses: dir.join("diagnoses.csv"),
            mapping: dir.join("code_map.csv"),
        };

        let mut w = csv::Writer::from_path(&paths.prescriptions)?;
        w.write_record(["patient_id", "medication_id", "release_date", "days_supply"])?;
        for p in &self.prescriptions {
            w.write_record([
                p.patient_id.clone(),
                p.medication_id.clone(),
                p.release_date.to_string(),
                p.days_supply.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(&paths.diagnoses)?;
        w.write_record(["patient_id", "diagnosis_date", "code", "setting"])?;
        for d in &self.diagnoses {
            let code = match &d.code {
                DiagnosisCode::Raw(s) => s.clone(),
                DiagnosisCode::Category(c) => (c.symbol() as char).to_string(),
            };
            w.write_record([
                d.patient_id.clone(),
                d.diagnosis_date.to_string(),
                code,
                (d.setting.symbol() as char).to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(&paths.mapping)?;
        w.write_record(["code", "symbol"])?;
        for (code, c) in &self.mapping {
            w.write_record([code.clone(), (c.symbol() as char).to_string()])?;
        }
        w.flush()?;
        Ok(paths)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixturePaths {
    pub prescriptions: PathBuf,
    pub diagnoses: PathBuf,
    pub mapping: PathBuf,
}
