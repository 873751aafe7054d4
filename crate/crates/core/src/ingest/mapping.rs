use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parse::{DiagnosisCode, DiagnosisEvent, RawDiagnosis};
use super::report::IngestReport;
use super::IngestError;
use crate::codes::Comorbidity;
use crate::PatientId;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownCodePolicy {
    /// Halt ingestion, listing every unmapped code.
    #[default]
    Error,
    /// Drop the diagnosis and count the code in the report.
    SkipWithReport,
}

/// Raw diagnosis code to comorbidity category.
///
/// Codes are compared after trimming, upper-casing and removing `.`, so
/// `290.0` and `2900` name the same code.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CodeMapping {
    codes: BTreeMap<String, Comorbidity>,
}

fn normalize(code: &str) -> String {
    code.trim().chars().filter(|&c| c != '.').map(|c| c.to_ascii_uppercase()).collect()
}

impl CodeMapping {
    /// Loads a `code,symbol` file. Targets must be category symbols; a code
    /// listed twice with different targets is rejected.
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let file = std::fs::File::open(path)
            .map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: Read>(input: R, source: &str) -> Result<Self, IngestError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let err = |line: u64, message: String| IngestError::Mapping {
            source_name: source.to_string(),
            line,
            message,
        };
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| err(1, e.to_string()))?
            .iter()
            .map(str::to_ascii_lowercase)
            .collect();
        if header != ["code", "symbol"] {
            return Err(err(1, format!("expected header code,symbol, found {}", header.join(","))));
        }
        let mut mapping = CodeMapping::default();
        for record in rdr.records() {
            let record = record.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let code = normalize(&record[0]);
            if code.is_empty() {
                return Err(err(line, "empty code".into()));
            }
            let symbol = match record[1].as_bytes() {
                [s] => Comorbidity::from_symbol(*s),
                _ => None,
            }
            .ok_or_else(|| err(line, format!("{:?} is not a category symbol", &record[1])))?;
            mapping.insert(code, symbol).map_err(|m| err(line, m))?;
        }
        Ok(mapping)
    }

    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, Comorbidity)>,
    ) -> Result<Self, String> {
        let mut mapping = CodeMapping::default();
        for (code, c) in pairs {
            mapping.insert(normalize(code), c)?;
        }
        Ok(mapping)
    }

    fn insert(&mut self, code: String, c: Comorbidity) -> Result<(), String> {
        match self.codes.insert(code.clone(), c) {
            Some(prev) if prev != c => Err(format!(
                "code {code} mapped to both {} and {}",
                prev.symbol() as char,
                c.symbol() as char
            )),
            _ => Ok(()),
        }
    }

    pub fn get(&self, raw_code: &str) -> Option<Comorbidity> {
        self.codes.get(&normalize(raw_code)).copied()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

/// Maps one raw code, applying `policy` when it is unknown.
pub fn map_code(
    raw_code: &str,
    mapping: &CodeMapping,
    policy: UnknownCodePolicy,
    report: &mut IngestReport,
) -> Result<Option<Comorbidity>, IngestError> {
    if let Some(c) = mapping.get(raw_code) {
        return Ok(Some(c));
    }
    match policy {
        UnknownCodePolicy::Error => Err(IngestError::UnknownCodes(vec![raw_code.to_string()])),
        UnknownCodePolicy::SkipWithReport => {
            *report.unknown_codes.entry(raw_code.to_string()).or_default() += 1;
            Ok(None)
        }
    }
}

/// Resolves raw diagnoses to categories. Under the error policy every
/// unknown code is collected before failing.
pub fn resolve_diagnoses(
    raw: &BTreeMap<PatientId, Vec<RawDiagnosis>>,
    mapping: Option<&CodeMapping>,
    policy: UnknownCodePolicy,
    report: &mut IngestReport,
) -> Result<BTreeMap<PatientId, Vec<DiagnosisEvent>>, IngestError> {
    let empty = CodeMapping::default();
    let mapping = mapping.unwrap_or(&empty);
    let mut unknown = BTreeSet::new();
    let mut out: BTreeMap<PatientId, Vec<DiagnosisEvent>> = BTreeMap::new();
    for (patient, rows) in raw {
        for row in rows {
            let category = match &row.code {
                DiagnosisCode::Category(c) => Some(*c),
                DiagnosisCode::Raw(code) => match map_code(code, mapping, policy, report) {
                    Ok(c) => c,
                    Err(_) => {
                        unknown.insert(code.clone());
                        None
                    }
                },
            };
            if let Some(category) = category {
                out.entry(patient.clone()).or_default().push(DiagnosisEvent {
                    patient_id: row.patient_id.clone(),
                    diagnosis_date: row.diagnosis_date,
                    category,
                    setting: row.setting,
                });
            }
        }
    }
    if !unknown.is_empty() {
        return Err(IngestError::UnknownCodes(unknown.into_iter().collect()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mapping() -> CodeMapping {
        CodeMapping::from_reader("code,symbol\n290.0,5\n042,H\n410.1,1\n".as_bytes(), "map.csv")
            .unwrap()
    }

    #[test]
    fn maps_configured_codes() {
        let m = mapping();
        let mut report = IngestReport::default();
        let policy = UnknownCodePolicy::Error;
        assert_eq!(map_code("290.0", &m, policy, &mut report).unwrap(), Some(Comorbidity::Dementia));
        assert_eq!(map_code("2900", &m, policy, &mut report).unwrap(), Some(Comorbidity::Dementia));
        assert_eq!(map_code("042", &m, policy, &mut report).unwrap(), Some(Comorbidity::AidsHiv));
    }

    #[test]
    fn unknown_code_policies() {
        let m = mapping();
        let mut report = IngestReport::default();
        let skipped = map_code("999.9", &m, UnknownCodePolicy::SkipWithReport, &mut report).unwrap();
        assert_eq!(skipped, None);
        assert_eq!(report.unknown_codes["999.9"], 1);
        let err = map_code("999.9", &m, UnknownCodePolicy::Error, &mut report).unwrap_err();
        assert!(err.to_string().contains("999.9"));
    }

    #[test]
    fn load_validation() {
        assert!(CodeMapping::from_reader("code,symbol\n1,Z\n".as_bytes(), "m").is_err());
        assert!(CodeMapping::from_reader("code,symbol\n1,5\n1,6\n".as_bytes(), "m").is_err());
        assert!(CodeMapping::from_reader("code,symbol\n1,5\n1,5\n".as_bytes(), "m").is_ok());
        assert!(CodeMapping::from_reader("icd,cat\n1,5\n".as_bytes(), "m").is_err());
        assert!(CodeMapping::from_reader("code,symbol\n,5\n".as_bytes(), "m").is_err());
    }

    #[test]
    fn resolve_lists_all_unknown_codes() {
        let d = chrono::NaiveDate::from_ymd_opt(2008, 1, 1).unwrap();
        let row = |code: &str| RawDiagnosis {
            patient_id: "p".into(),
            diagnosis_date: d,
            code: DiagnosisCode::Raw(code.into()),
            setting: crate::codes::CareSetting::Outpatient,
        };
        let mut raw = BTreeMap::new();
        raw.insert("p".to_string(), vec![row("290.0"), row("X1"), row("X2")]);
        let m = mapping();
        let mut report = IngestReport::default();
        match resolve_diagnoses(&raw, Some(&m), UnknownCodePolicy::Error, &mut report) {
            Err(IngestError::UnknownCodes(codes)) => assert_eq!(codes, vec!["X1", "X2"]),
            other => panic!("unexpected {other:?}"),
        }
        let ok = resolve_diagnoses(&raw, Some(&m), UnknownCodePolicy::SkipWithReport, &mut report)
            .unwrap();
        assert_eq!(ok["p"].len(), 1);
        assert_eq!(report.unknown_codes.len(), 2);
    }
}
