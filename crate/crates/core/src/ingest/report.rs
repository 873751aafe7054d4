use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub source: String,
    pub line: u64,
    pub reason: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedPatient {
    pub patient_id: String,
    pub reason: String,
}

/// Counts and echoes of everything ingestion accepted, rejected or
/// resolved by policy. Reports merge associatively.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_total: usize,
    pub rows_accepted: usize,
    pub rows_rejected: usize,
    pub rejected: Vec<RejectedRow>,
    pub excluded_patients: Vec<ExcludedPatient>,
    /// Unmapped raw codes skipped under the skip policy, with occurrence counts.
    pub unknown_codes: BTreeMap<String, usize>,
    pub fills_after_end: usize,
    pub diagnoses_out_of_range: usize,
    pub duplicate_diagnoses: usize,
    /// Same-day, same-category diagnoses with both settings, resolved to inpatient.
    pub setting_conflicts: usize,
}

impl IngestReport {
    pub fn merge(&mut self, other: IngestReport) {
        self.rows_total += other.rows_total;
        self.rows_accepted += other.rows_accepted;
        self.rows_rejected += other.rows_rejected;
        self.rejected.extend(other.rejected);
        self.excluded_patients.extend(other.excluded_patients);
        for (code, n) in other.unknown_codes {
            *self.unknown_codes.entry(code).or_default() += n;
        }
        self.fills_after_end += other.fills_after_end;
        self.diagnoses_out_of_range += other.diagnoses_out_of_range;
        self.duplicate_diagnoses += other.duplicate_diagnoses;
        self.setting_conflicts += other.setting_conflicts;
    }

    pub(crate) fn reject(&mut self, source: &str, line: u64, reason: impl Into<String>, text: String) {
        self.rows_rejected += 1;
        self.rejected.push(RejectedRow { source: source.to_string(), line, reason: reason.into(), text });
    }

    pub(crate) fn exclude(&mut self, patient_id: &str, reason: String) {
        log::info!("excluding patient {patient_id}: {reason}");
        self.excluded_patients.push(ExcludedPatient { patient_id: patient_id.to_string(), reason });
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rows read:              {}", self.rows_total);
        let _ = writeln!(out, "rows accepted:          {}", self.rows_accepted);
        let _ = writeln!(out, "rows rejected:          {}", self.rows_rejected);
        let _ = writeln!(out, "patients excluded:      {}", self.excluded_patients.len());
        let _ = writeln!(out, "unknown codes skipped:  {}", self.unknown_codes.values().sum::<usize>());
        let _ = writeln!(out, "fills after study end:  {}", self.fills_after_end);
        let _ = writeln!(out, "diagnoses out of range: {}", self.diagnoses_out_of_range);
        let _ = writeln!(out, "duplicate diagnoses:    {}", self.duplicate_diagnoses);
        let _ = writeln!(out, "setting conflicts (I):  {}", self.setting_conflicts);
        for r in &self.rejected {
            let _ = writeln!(out, "rejected {}:{}: {} | {}", r.source, r.line, r.reason, r.text);
        }
        for p in &self.excluded_patients {
            let _ = writeln!(out, "excluded {}: {}", p.patient_id, p.reason);
        }
        for (code, n) in &self.unknown_codes {
            let _ = writeln!(out, "unknown code {code} x{n}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_is_associative_on_counts() {
        let mut a = IngestReport { rows_total: 3, rows_accepted: 2, rows_rejected: 1, ..Default::default() };
        a.unknown_codes.insert("X1".into(), 1);
        let mut b = IngestReport { rows_total: 5, rows_accepted: 5, ..Default::default() };
        b.unknown_codes.insert("X1".into(), 2);
        let c = IngestReport { fills_after_end: 4, ..Default::default() };

        let mut left = a.clone();
        left.merge(b.clone());
        left.merge(c.clone());
        let mut bc = b;
        bc.merge(c);
        let mut right = a;
        right.merge(bc);
        assert_eq!(left, right);
        assert_eq!(left.unknown_codes["X1"], 3);
        assert!(left.to_text().contains("rows read:              8"));
    }
}
