use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::parse::DiagnosisEvent;
use crate::block::SequenceBlock;
use crate::codes::{CareSetting, Comorbidity, InfoKind};
use crate::error::Result;
use crate::sequence::RefSequence;
use crate::window::DateWindow;

/// Comorbidity block with its parallel setting block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComorbidityBlocks {
    pub comorbidity: SequenceBlock,
    /// Cell `(row, day)` holds the setting of the diagnosis at the same cell
    /// of the comorbidity block.
    pub setting: SequenceBlock,
    pub out_of_range: usize,
    pub duplicates: usize,
    /// Cells whose diagnoses carried both settings.
    pub setting_conflicts: usize,
}

/// Block start: the earlier of the earliest diagnosis and the study start.
pub fn comorbidity_start_date(diagnoses: &[DiagnosisEvent], study_start: NaiveDate) -> NaiveDate {
    diagnoses.iter().map(|d| d.diagnosis_date).min().map_or(study_start, |e| e.min(study_start))
}

/// Stacks each date's distinct categories in symbol order across rows.
/// Repeated `(date, category)` pairs collapse to one cell, inpatient
/// winning over outpatient.
pub fn build_comorbidity_block(
    patient_id: &str,
    diagnoses: &[DiagnosisEvent],
    start_date: NaiveDate,
    end_date: NaiveDate,
) -> Result<ComorbidityBlocks> {
    let coverage = DateWindow::new(start_date, end_date)?;
    let mut per_date: BTreeMap<NaiveDate, BTreeMap<Comorbidity, CareSetting>> = BTreeMap::new();
    let (mut out_of_range, mut duplicates) = (0, 0);
    let mut conflicted = std::collections::BTreeSet::new();
    for dx in diagnoses {
        if !coverage.contains(dx.diagnosis_date) {
            out_of_range += 1;
            continue;
        }
        let day = per_date.entry(dx.diagnosis_date).or_default();
        match day.get_mut(&dx.category) {
            None => {
                day.insert(dx.category, dx.setting);
            }
            Some(existing) => {
                duplicates += 1;
                if *existing != dx.setting {
                    conflicted.insert((dx.diagnosis_date, dx.category));
                    *existing = CareSetting::Inpatient;
                }
            }
        }
    }

    let len = coverage.width();
    let comorbidity_template = RefSequence::empty(patient_id, InfoKind::Comorbidity, start_date, len)?;
    let setting_template = RefSequence::empty(patient_id, InfoKind::Setting, start_date, len)?;
    let mut categories = BTreeMap::new();
    let mut settings = BTreeMap::new();
    for (date, day) in &per_date {
        categories.insert(*date, day.keys().map(|c| c.symbol()).collect());
        settings.insert(*date, day.values().map(|s| s.symbol()).collect());
    }
    Ok(ComorbidityBlocks {
        comorbidity: SequenceBlock::from_cells(&comorbidity_template, &categories)?,
        setting: SequenceBlock::from_cells(&setting_template, &settings)?,
        out_of_range,
        duplicates,
        setting_conflicts: conflicted.len(),
    })
}
