//! Line-oriented text store for sequences and blocks.
//!
//! Each record is one newline-terminated line of seven tab-separated
//! fields:
//!
//! ```text
//! patient_id  kind  label  reference_date  encoding  length  body
//! ```
//!
//! `kind` is `exposure`, `comorbidity`, `setting` or `custom:<symbols>`.
//! `encoding` is `dense` (body is the payload string) or `runlength` (body
//! is comma-separated `start:length` pairs, empty when there are no runs).
//! Block rows are stored as separate records labelled `<label>#<row>`,
//! rows numbered from 1.
//!
//! Next to every store file `F` sits `F.manifest.json` with record counts
//! and a SHA-256 checksum of the store bytes. Manifests carry no
//! timestamps, so identical inputs give identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::block::SequenceBlock;
use crate::codes::{Alphabet, InfoKind};
use crate::error::SequenceError;
use crate::ingest::CompiledCohort;
use crate::sequence::{RefSequence, RunSequence};
use crate::PatientId;

pub const FORMAT: &str = "tiavseq-store/1";
pub const CHECKSUM_ALGORITHM: &str = "sha256";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: checksum mismatch (manifest {expected}, content {found})")]
    Corrupt { path: PathBuf, expected: String, found: String },
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("record {identity} rejected: {reason}")]
    Rejected { identity: String, reason: String },
    #[error("{path}: bad manifest: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Dense,
    Runlength,
}

impl Encoding {
    fn as_str(self) -> &'static str {
        match self {
            Encoding::Dense => "dense",
            Encoding::Runlength => "runlength",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RecordBody {
    Dense(Vec<u8>),
    Runs(Vec<(usize, usize)>),
}

/// One persisted sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SequenceRecord {
    pub patient_id: PatientId,
    pub kind: InfoKind,
    pub alphabet: Alphabet,
    pub label: String,
    pub reference_date: NaiveDate,
    pub length: usize,
    pub body: RecordBody,
}

impl SequenceRecord {
    pub fn dense(label: &str, seq: &RefSequence) -> Self {
        Self {
            patient_id: seq.patient_id().to_string(),
            kind: seq.kind(),
            alphabet: seq.alphabet().clone(),
            label: label.to_string(),
            reference_date: seq.reference_date(),
            length: seq.len(),
            body: RecordBody::Dense(seq.payload().to_vec()),
        }
    }

    pub fn runlength(label: &str, runs: &RunSequence) -> Self {
        Self {
            patient_id: runs.patient_id().to_string(),
            kind: InfoKind::Exposure,
            alphabet: InfoKind::Exposure.default_alphabet().expect("built-in"),
            label: label.to_string(),
            reference_date: runs.reference_date(),
            length: runs.length(),
            body: RecordBody::Runs(runs.runs().to_vec()),
        }
    }

    /// One dense record per block row, labelled `<label>#<row>`.
    pub fn from_block(label: &str, block: &SequenceBlock) -> Vec<Self> {
        block
            .rows()
            .iter()
            .enumerate()
            .map(|(i, row)| Self::dense(&format!("{label}#{}", i + 1), row))
            .collect()
    }

    pub fn encoding(&self) -> Encoding {
        match self.body {
            RecordBody::Dense(_) => Encoding::Dense,
            RecordBody::Runs(_) => Encoding::Runlength,
        }
    }

    /// Label without any `#<row>` suffix.
    pub fn base_label(&self) -> &str {
        self.block_row().map_or(&self.label, |(base, _)| base)
    }

    /// `(base label, row)` for block-row records.
    pub fn block_row(&self) -> Option<(&str, usize)> {
        let (base, row) = self.label.rsplit_once('#')?;
        Some((base, row.parse().ok().filter(|&r| r >= 1)?))
    }

    fn identity(&self) -> String {
        format!("{}/{}/{}", self.patient_id, self.kind, self.label)
    }

    /// Dense sequence this record encodes.
    pub fn to_sequence(&self) -> Result<RefSequence, SequenceError> {
        match &self.body {
            RecordBody::Dense(payload) => {
                if payload.len() != self.length {
                    return Err(SequenceError::Structure(format!(
                        "declared length {} but payload has {} symbols",
                        self.length,
                        payload.len()
                    )));
                }
                RefSequence::with_alphabet(
                    self.patient_id.clone(),
                    self.kind,
                    self.reference_date,
                    self.alphabet.clone(),
                    payload.clone(),
                )
            }
            RecordBody::Runs(_) => Ok(self.to_runs()?.to_dense()),
        }
    }

    /// Run-length form; dense records are converted.
    pub fn to_runs(&self) -> Result<RunSequence, SequenceError> {
        match &self.body {
            RecordBody::Runs(runs) => {
                if self.kind != InfoKind::Exposure {
                    return Err(SequenceError::KindMismatch {
                        expected: InfoKind::Exposure,
                        found: self.kind,
                    });
                }
                RunSequence::new(self.patient_id.clone(), self.reference_date, self.length, runs.clone())
            }
            RecordBody::Dense(_) => self.to_sequence()?.to_runs(),
        }
    }

    fn validate(&self) -> Result<(), StoreError> {
        let reject = |reason: String| StoreError::Rejected { identity: self.identity(), reason };
        for (name, value) in [("patient_id", &self.patient_id), ("label", &self.label)] {
            if value.is_empty() || value.contains(['\t', '\n', '\r']) {
                return Err(reject(format!("{name} must be non-empty without tabs or newlines")));
            }
        }
        self.to_sequence().map_err(|e| reject(e.to_string()))?;
        if let RecordBody::Runs(_) = self.body {
            self.to_runs().map_err(|e| reject(e.to_string()))?;
        }
        Ok(())
    }

    fn kind_field(&self) -> String {
        match self.kind {
            InfoKind::Custom => {
                format!("custom:{}", String::from_utf8_lossy(self.alphabet.symbols()))
            }
            k => k.as_str().to_string(),
        }
    }

    /// The record's line, without the trailing newline.
    pub fn to_line(&self) -> String {
        let body = match &self.body {
            RecordBody::Dense(p) => String::from_utf8(p.clone()).expect("ASCII alphabet"),
            RecordBody::Runs(runs) => {
                let mut s = String::new();
                for (i, (start, len)) in runs.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    let _ = write!(s, "{start}:{len}");
                }
                s
            }
        };
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.patient_id,
            self.kind_field(),
            self.label,
            self.reference_date,
            self.encoding().as_str(),
            self.length,
            body
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [patient_id, kind, label, reference_date, encoding, length, body] = fields[..] else {
            return Err(format!("expected 7 tab-separated fields, found {}", fields.len()));
        };
        let (kind, alphabet) = match kind.strip_prefix("custom:") {
            Some(symbols) => (
                InfoKind::Custom,
                Alphabet::custom(symbols.as_bytes()).ok_or("invalid custom alphabet")?,
            ),
            None => {
                let k: InfoKind = kind.parse()?;
                (k, k.default_alphabet().ok_or("custom kind needs an alphabet")?)
            }
        };
        let reference_date = NaiveDate::parse_from_str(reference_date, "%Y-%m-%d")
            .map_err(|e| format!("reference_date {reference_date:?}: {e}"))?;
        let length: usize = length.parse().map_err(|e| format!("length {length:?}: {e}"))?;
        let body = match encoding {
            "dense" => RecordBody::Dense(body.as_bytes().to_vec()),
            "runlength" if body.is_empty() => RecordBody::Runs(Vec::new()),
            "runlength" => RecordBody::Runs(
                body.split(',')
                    .map(|pair| {
                        let (s, l) = pair.split_once(':').ok_or(format!("run {pair:?} lacks ':'"))?;
                        Ok((
                            s.parse().map_err(|e| format!("run start {s:?}: {e}"))?,
                            l.parse().map_err(|e| format!("run length {l:?}: {e}"))?,
                        ))
                    })
                    .collect::<Result<_, String>>()?,
            ),
            other => return Err(format!("unknown encoding {other:?}")),
        };
        let record = SequenceRecord {
            patient_id: patient_id.to_string(),
            kind,
            alphabet,
            label: label.to_string(),
            reference_date,
            length,
            body,
        };
        record.validate().map_err(|e| e.to_string())?;
        Ok(record)
    }
}

/// Reassembles block-row records into blocks keyed by `(patient, label)`.
pub fn assemble_blocks(
    records: &[SequenceRecord],
) -> Result<BTreeMap<(PatientId, String), SequenceBlock>, SequenceError> {
    let mut rows: BTreeMap<(PatientId, String), BTreeMap<usize, RefSequence>> = BTreeMap::new();
    for r in records {
        if let Some((base, row)) = r.block_row() {
            rows.entry((r.patient_id.clone(), base.to_string()))
                .or_default()
                .insert(row, r.to_sequence()?);
        }
    }
    rows.into_iter()
        .map(|(key, rows)| {
            if rows.keys().copied().ne(1..=rows.len()) {
                return Err(SequenceError::Structure(format!(
                    "block {}/{} has non-contiguous row numbers",
                    key.0, key.1
                )));
            }
            Ok((key, SequenceBlock::new(rows.into_values().collect())?))
        })
        .collect()
}

/// Label of a patient's comorbidity block records.
pub const COMORBIDITY_LABEL: &str = "charlson";
/// Label of a patient's setting block records.
pub const SETTING_LABEL: &str = "setting";

/// Dense records for a compiled cohort: exposures labelled by medication id,
/// then the comorbidity and setting block rows. Patients in id order.
pub fn cohort_records(cohort: &CompiledCohort) -> Vec<SequenceRecord> {
    let mut out = Vec::new();
    for seqs in cohort.patients.values() {
        for (med, seq) in &seqs.exposures {
            out.push(SequenceRecord::dense(med, seq));
        }
        if let Some(b) = &seqs.comorbidity {
            out.extend(SequenceRecord::from_block(COMORBIDITY_LABEL, b));
        }
        if let Some(b) = &seqs.setting {
            out.extend(SequenceRecord::from_block(SETTING_LABEL, b));
        }
    }
    out
}

/// Run-length records for every exposure in a compiled cohort.
pub fn cohort_runlength_records(cohort: &CompiledCohort) -> Result<Vec<SequenceRecord>, SequenceError> {
    let mut out = Vec::new();
    for seqs in cohort.patients.values() {
        for (med, seq) in &seqs.exposures {
            out.push(SequenceRecord::runlength(med, &seq.to_runs()?));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub records: usize,
    pub patients: usize,
    pub dense_records: usize,
    pub runlength_records: usize,
    pub bytes: u64,
    pub checksum_algorithm: String,
    pub checksum: String,
}

pub fn manifest_path(store: &Path) -> PathBuf {
    let mut name = store.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes records in the given order, then the manifest. Every record is
/// validated before anything touches the disk.
pub fn write_store(records: &[SequenceRecord], path: &Path) -> Result<Manifest, StoreError> {
    let mut content = String::new();
    for r in records {
        r.validate()?;
        content.push_str(&r.to_line());
        content.push('\n');
    }
    let patients: BTreeSet<&str> = records.iter().map(|r| r.patient_id.as_str()).collect();
    let dense_records = records.iter().filter(|r| r.encoding() == Encoding::Dense).count();
    let manifest = Manifest {
        format: FORMAT.to_string(),
        records: records.len(),
        patients: patients.len(),
        dense_records,
        runlength_records: records.len() - dense_records,
        bytes: content.len() as u64,
        checksum_algorithm: CHECKSUM_ALGORITHM.to_string(),
        checksum: checksum(content.as_bytes()),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, &content).map_err(io_err(path))?;
    let mpath = manifest_path(path);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&mpath, json + "\n").map_err(io_err(&mpath))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest, StoreError> {
    let mpath = manifest_path(path);
    let text = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| StoreError::Manifest { path: mpath.clone(), message: e.to_string() })?;
    if manifest.format != FORMAT || manifest.checksum_algorithm != CHECKSUM_ALGORITHM {
        return Err(StoreError::Manifest {
            path: mpath,
            message: format!(
                "unsupported format {} / checksum {}",
                manifest.format, manifest.checksum_algorithm
            ),
        });
    }
    Ok(manifest)
}

/// Conjunction of optional patient, kind and label predicates. Labels match
/// either exactly or by block base label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordFilter {
    pub patients: Option<BTreeSet<String>>,
    pub kinds: Option<BTreeSet<InfoKind>>,
    pub labels: Option<BTreeSet<String>>,
}

impl RecordFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn patient(mut self, id: &str) -> Self {
        self.patients.get_or_insert_with(BTreeSet::new).insert(id.to_string());
        self
    }

    pub fn kind(mut self, kind: InfoKind) -> Self {
        self.kinds.get_or_insert_with(BTreeSet::new).insert(kind);
        self
    }

    pub fn label(mut self, label: &str) -> Self {
        self.labels.get_or_insert_with(BTreeSet::new).insert(label.to_string());
        self
    }

    pub fn matches(&self, r: &SequenceRecord) -> bool {
        self.patients.as_ref().is_none_or(|p| p.contains(&r.patient_id))
            && self.kinds.as_ref().is_none_or(|k| k.contains(&r.kind))
            && self
                .labels
                .as_ref()
                .is_none_or(|l| l.contains(&r.label) || l.contains(r.base_label()))
    }
}

/// Verifies the manifest checksum, then decodes matching records in file
/// order.
pub fn read_store(path: &Path, filter: &RecordFilter) -> Result<Vec<SequenceRecord>, StoreError> {
    let manifest = read_manifest(path)?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    let found = checksum(&bytes);
    if found != manifest.checksum {
        return Err(StoreError::Corrupt { path: path.to_path_buf(), expected: manifest.checksum, found });
    }
    let text = String::from_utf8(bytes).map_err(|e| StoreError::Malformed {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let record = SequenceRecord::parse_line(line).map_err(|message| StoreError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        if filter.matches(&record) {
            out.push(record);
        }
    }
    Ok(out)
}

/// Byte footprint of raw event files against the stores built from them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub raw_event_bytes: u64,
    /// Bytes of dense-encoded record lines, newlines included.
    pub dense_bytes: u64,
    pub runlength_bytes: u64,
    pub patients: usize,
    /// Distinct `(patient, kind, label)` sequences across all stores.
    pub sequences: usize,
}

impl StoreStats {
    pub fn store_bytes(&self) -> u64 {
        self.dense_bytes + self.runlength_bytes
    }

    /// Store bytes over raw bytes; `None` without raw input.
    pub fn store_to_raw_ratio(&self) -> Option<f64> {
        (self.raw_event_bytes > 0).then(|| self.store_bytes() as f64 / self.raw_event_bytes as f64)
    }

    pub fn to_text(&self) -> String {
        let ratio = self.store_to_raw_ratio().map_or("n/a".to_string(), |r| format!("{r:.4}"));
        format!(
            "raw event bytes:  {}\ndense bytes:      {}\nrunlength bytes:  {}\npatients:         {}\nsequences:        {}\nstore/raw ratio:  {}\n",
            self.raw_event_bytes, self.dense_bytes, self.runlength_bytes, self.patients, self.sequences, ratio
        )
    }
}

/// Measures raw file sizes and classifies every store line by encoding.
pub fn compute_stats(raw_event_files: &[PathBuf], store_paths: &[PathBuf]) -> Result<StoreStats, StoreError> {
    let mut stats = StoreStats::default();
    for f in raw_event_files {
        stats.raw_event_bytes += fs::metadata(f).map_err(io_err(f))?.len();
    }
    let mut patients = BTreeSet::new();
    let mut sequences = BTreeSet::new();
    for p in store_paths {
        let text = fs::read_to_string(p).map_err(io_err(p))?;
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let record = SequenceRecord::parse_line(line.trim_end_matches('\n')).map_err(|message| {
                StoreError::Malformed { path: p.clone(), line: i + 1, message }
            })?;
            let n = line.len() as u64;
            match record.encoding() {
                Encoding::Dense => stats.dense_bytes += n,
                Encoding::Runlength => stats.runlength_bytes += n,
            }
            patients.insert(record.patient_id.clone());
            sequences.insert((record.patient_id, record.kind, record.label));
        }
    }
    stats.patients = patients.len();
    stats.sequences = sequences.len();
    Ok(stats)
}
