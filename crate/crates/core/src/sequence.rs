//! Referenced sequences: one patient's daily states for one kind of
//! information, anchored at a reference date.
//!
//! Positions are 1-based. Position `k` holds the state of date
//! `reference_date + (k - 1)` and a date `t` lives at position
//! `t - reference_date + 1`. All windows are inclusive on both ends.

use std::fmt;

use chrono::NaiveDate;

use crate::codes::{self, Alphabet, ClinicalState, InfoKind};
use crate::error::{Result, SequenceError};
use crate::window::{add_days, DateWindow};
use crate::PatientId;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RefSequence {
    patient_id: PatientId,
    kind: InfoKind,
    reference_date: NaiveDate,
    alphabet: Alphabet,
    payload: Vec<u8>,
}

impl RefSequence {
    /// Sequence of a built-in kind. Custom kinds go through
    /// [`RefSequence::with_alphabet`].
    pub fn new(
        patient_id: impl Into<PatientId>,
        kind: InfoKind,
        reference_date: NaiveDate,
        payload: impl Into<Vec<u8>>,
    ) -> Result<Self> {
        let alphabet = kind.default_alphabet().ok_or_else(|| {
            SequenceError::Parameter("custom sequences need an explicit alphabet".into())
        })?;
        Self::with_alphabet(patient_id, kind, reference_date, alphabet, payload)
    }

    pub fn with_alphabet(
        patient_id: impl Into<PatientId>,
        kind: InfoKind,
        reference_date: NaiveDate,
        alphabet: Alphabet,
        payload: impl Into<Vec<u8>>,
    ) -> Result<Self> {
        let payload = payload.into();
        if payload.is_empty() {
            return Err(SequenceError::EmptyPayload);
        }
        if let Some(&bad) = payload.iter().find(|&&s| !alphabet.contains(s)) {
            return Err(SequenceError::InvalidSymbol { symbol: bad as char, kind });
        }
        add_days(reference_date, payload.len() as i64 - 1)?;
        Ok(Self { patient_id: patient_id.into(), kind, reference_date, alphabet, payload })
    }

    /// Binary exposure sequence from a `'0'`/`'1'` string.
    pub fn binary(
        patient_id: impl Into<PatientId>,
        reference_date: NaiveDate,
        bits: &str,
    ) -> Result<Self> {
        Self::new(patient_id, InfoKind::Exposure, reference_date, bits.as_bytes())
    }

    /// `len` days of the kind's empty symbol (`'0'` or filler).
    pub fn empty(
        patient_id: impl Into<PatientId>,
        kind: InfoKind,
        reference_date: NaiveDate,
        len: usize,
    ) -> Result<Self> {
        Self::new(patient_id, kind, reference_date, vec![kind.empty_symbol(); len])
    }

    /// Constructor for payloads already known to be valid.
    pub(crate) fn from_parts_unchecked(
        patient_id: PatientId,
        kind: InfoKind,
        reference_date: NaiveDate,
        alphabet: Alphabet,
        payload: Vec<u8>,
    ) -> Self {
        debug_assert!(!payload.is_empty());
        Self { patient_id, kind, reference_date, alphabet, payload }
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn kind(&self) -> InfoKind {
        self.kind
    }

    pub fn reference_date(&self) -> NaiveDate {
        self.reference_date
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// Payload as text; alphabets are ASCII so this never fails.
    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.payload).expect("alphabets are ASCII")
    }

    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn end_date(&self) -> NaiveDate {
        self.reference_date + chrono::Days::new(self.payload.len() as u64 - 1)
    }

    pub fn coverage(&self) -> DateWindow {
        DateWindow::new(self.reference_date, self.end_date()).expect("non-empty payload")
    }

    /// Time function: the calendar date of position `k`.
    pub fn date_at(&self, k: usize) -> Result<NaiveDate> {
        if k == 0 || k > self.len() {
            return Err(SequenceError::PositionOutOfRange { position: k, len: self.len() });
        }
        Ok(self.reference_date + chrono::Days::new(k as u64 - 1))
    }

    /// Inverse time function: the position of date `t`.
    pub fn position_of(&self, t: NaiveDate) -> Result<usize> {
        if t < self.reference_date {
            return Err(SequenceError::BeforeCoverage { date: t, start: self.reference_date });
        }
        let k = (t - self.reference_date).num_days() as usize + 1;
        if k > self.len() {
            return Err(SequenceError::AfterCoverage { date: t, end: self.end_date() });
        }
        Ok(k)
    }

    pub fn symbol_at(&self, t: NaiveDate) -> Result<u8> {
        Ok(self.payload[self.position_of(t)? - 1])
    }

    /// State function applied at date `t`.
    pub fn state_at(&self, t: NaiveDate) -> Result<ClinicalState> {
        let symbol = self.symbol_at(t)?;
        Ok(codes::state_of(self.kind, symbol).expect("payload symbols are in the alphabet"))
    }

    /// Zero-based half-open index range of `w`, or the bound it violates.
    pub(crate) fn index_range(&self, w: &DateWindow) -> Result<std::ops::Range<usize>> {
        let first = self.position_of(w.start())?;
        let last = self.position_of(w.end())?;
        Ok(first - 1..last)
    }

    pub fn window_symbols(&self, w: &DateWindow) -> Result<&[u8]> {
        Ok(&self.payload[self.index_range(w)?])
    }

    /// Sub-sequence over `w`, re-referenced to `w.start()`.
    pub fn slice(&self, w: &DateWindow) -> Result<RefSequence> {
        let range = self.index_range(w)?;
        Ok(Self {
            patient_id: self.patient_id.clone(),
            kind: self.kind,
            reference_date: w.start(),
            alphabet: self.alphabet.clone(),
            payload: self.payload[range].to_vec(),
        })
    }

    /// Number of days in `w` holding `symbol`.
    pub fn count_symbol(&self, symbol: u8, w: &DateWindow) -> Result<usize> {
        if !self.alphabet.contains(symbol) {
            return Err(SequenceError::InvalidSymbol { symbol: symbol as char, kind: self.kind });
        }
        Ok(self.window_symbols(w)?.iter().filter(|&&s| s == symbol).count())
    }

    pub fn count_ones(&self, w: &DateWindow) -> Result<usize> {
        self.require_binary()?;
        self.count_symbol(b'1', w)
    }

    pub(crate) fn require_binary(&self) -> Result<()> {
        if self.kind.is_binary() {
            Ok(())
        } else {
            Err(SequenceError::KindMismatch { expected: InfoKind::Exposure, found: self.kind })
        }
    }

    /// Positionwise AND over the shared date span. See [`overlap_and`].
    pub fn and(&self, other: &RefSequence) -> Result<RefSequence> {
        overlap_and(self, other)
    }

    /// Best `z`-day window inside `range` by count of `'1'`; ties go to the
    /// earliest start.
    pub fn max_ones_in_window(&self, z: usize, range: &DateWindow) -> Result<WindowMax> {
        self.require_binary()?;
        if z == 0 {
            return Err(SequenceError::Parameter("window width must be at least 1 day".into()));
        }
        let symbols = self.window_symbols(range)?;
        if z > symbols.len() {
            return Err(SequenceError::Parameter(format!(
                "window width {z} exceeds range width {}",
                symbols.len()
            )));
        }
        let mut current = symbols[..z].iter().filter(|&&s| s == b'1').count();
        let mut best = current;
        let mut best_offset = 0;
        for i in z..symbols.len() {
            current += usize::from(symbols[i] == b'1');
            current -= usize::from(symbols[i - z] == b'1');
            if current > best {
                best = current;
                best_offset = i + 1 - z;
            }
        }
        Ok(WindowMax { count: best, start: add_days(range.start(), best_offset as i64)? })
    }

    /// Trailing `w`-day moving average of exposure. The first value is for
    /// date `f(w)`; earlier positions have no full window.
    pub fn moving_average(&self, w: usize) -> Result<Vec<(NaiveDate, f64)>> {
        self.require_binary()?;
        if w == 0 || w > self.len() {
            return Err(SequenceError::Parameter(format!(
                "moving-average width {w} outside 1..={}",
                self.len()
            )));
        }
        let mut out = Vec::with_capacity(self.len() + 1 - w);
        let mut ones = self.payload[..w].iter().filter(|&&s| s == b'1').count();
        let mut date = self.date_at(w)?;
        out.push((date, ones as f64 / w as f64));
        for k in w..self.len() {
            ones += usize::from(self.payload[k] == b'1');
            ones -= usize::from(self.payload[k - w] == b'1');
            date = date.succ_opt().ok_or(SequenceError::DateOverflow)?;
            out.push((date, ones as f64 / w as f64));
        }
        Ok(out)
    }

    /// Run-length form listing each maximal `'1'` segment.
    pub fn to_runs(&self) -> Result<RunSequence> {
        self.require_binary()?;
        let mut runs = Vec::new();
        let mut i = 0;
        while i < self.payload.len() {
            if self.payload[i] == b'1' {
                let start = i;
                while i < self.payload.len() && self.payload[i] == b'1' {
                    i += 1;
                }
                runs.push((start + 1, i - start));
            } else {
                i += 1;
            }
        }
        Ok(RunSequence {
            patient_id: self.patient_id.clone(),
            reference_date: self.reference_date,
            length: self.len(),
            runs,
        })
    }

    pub fn from_runs(runs: &RunSequence) -> RefSequence {
        runs.to_dense()
    }
}

impl fmt::Display for RefSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}@{} {}", self.patient_id, self.kind, self.reference_date, self.as_str())
    }
}

/// Result of a sliding-window maximum search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowMax {
    pub count: usize,
    /// First day of the earliest window achieving `count`.
    pub start: NaiveDate,
}

/// Same-day co-exposure: `'1'` where both binary inputs are `'1'`.
///
/// The result covers the intersection of the two coverages and is
/// referenced at the later of the two reference dates.
pub fn overlap_and(a: &RefSequence, b: &RefSequence) -> Result<RefSequence> {
    a.require_binary()?;
    b.require_binary()?;
    if a.patient_id != b.patient_id {
        return Err(SequenceError::Alignment(format!(
            "patients differ: {} vs {}",
            a.patient_id, b.patient_id
        )));
    }
    let shared = a.coverage().intersect(&b.coverage()).ok_or_else(|| {
        SequenceError::Alignment(format!(
            "coverages {} and {} do not intersect",
            a.coverage(),
            b.coverage()
        ))
    })?;
    let xs = a.window_symbols(&shared)?;
    let ys = b.window_symbols(&shared)?;
    let payload = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| if x == b'1' && y == b'1' { b'1' } else { b'0' })
        .collect();
    Ok(RefSequence::from_parts_unchecked(
        a.patient_id.clone(),
        InfoKind::Exposure,
        shared.start(),
        a.alphabet.clone(),
        payload,
    ))
}

/// Binary sequence stored as its maximal `'1'` segments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunSequence {
    patient_id: PatientId,
    reference_date: NaiveDate,
    length: usize,
    runs: Vec<(usize, usize)>,
}

impl RunSequence {
    /// Validates that runs are sorted, in bounds, non-empty, and neither
    /// overlap nor touch.
    pub fn new(
        patient_id: impl Into<PatientId>,
        reference_date: NaiveDate,
        length: usize,
        runs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if length == 0 {
            return Err(SequenceError::EmptyPayload);
        }
        add_days(reference_date, length as i64 - 1)?;
        let mut next_free = 1;
        for &(start, len) in &runs {
            if start == 0 || len == 0 {
                return Err(SequenceError::Structure(format!(
                    "run ({start},{len}) must have start >= 1 and length >= 1"
                )));
            }
            if start < next_free {
                return Err(SequenceError::Structure(format!(
                    "run ({start},{len}) overlaps, touches, or precedes the previous run"
                )));
            }
            let last = start + len - 1;
            if last > length {
                return Err(SequenceError::Structure(format!(
                    "run ({start},{len}) ends past length {length}"
                )));
            }
            next_free = last + 2;
        }
        Ok(Self { patient_id: patient_id.into(), reference_date, length, runs })
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn reference_date(&self) -> NaiveDate {
        self.reference_date
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// `(start_position, run_length)` pairs.
    pub fn runs(&self) -> &[(usize, usize)] {
        &self.runs
    }

    pub fn ones(&self) -> usize {
        self.runs.iter().map(|&(_, len)| len).sum()
    }

    pub fn to_dense(&self) -> RefSequence {
        let mut payload = vec![b'0'; self.length];
        for &(start, len) in &self.runs {
            payload[start - 1..start - 1 + len].fill(b'1');
        }
        RefSequence::from_parts_unchecked(
            self.patient_id.clone(),
            InfoKind::Exposure,
            self.reference_date,
            InfoKind::Exposure.default_alphabet().expect("built-in"),
            payload,
        )
    }
}
