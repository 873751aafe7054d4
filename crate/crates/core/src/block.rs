//! Stacks of aligned nominal sequences holding concurrent same-day symbols.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use crate::codes::{InfoKind, FILLER};
use crate::error::{Result, SequenceError};
use crate::sequence::RefSequence;
use crate::window::DateWindow;

/// Aligned rows of one nominal kind for one patient.
///
/// Row `r` at a date holds the `r`-th symbol recorded that day; a date with
/// fewer symbols than rows is padded with filler below its last symbol. The
/// block has exactly as many rows as its busiest date (one row when empty).
/// Comorbidity and custom blocks keep each date's symbols distinct and in
/// alphabet order. Setting blocks mirror the row layout of their comorbidity
/// block, so a setting letter may repeat within a date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceBlock {
    rows: Vec<RefSequence>,
}

impl SequenceBlock {
    pub fn new(rows: Vec<RefSequence>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| SequenceError::Structure("a block needs at least one row".into()))?;
        let kind = first.kind();
        if kind.is_binary() || !first.alphabet().contains(FILLER) {
            return Err(SequenceError::Structure(format!(
                "{kind} sequences cannot form a block (no filler symbol)"
            )));
        }
        for row in &rows[1..] {
            if row.patient_id() != first.patient_id()
                || row.kind() != kind
                || row.reference_date() != first.reference_date()
                || row.len() != first.len()
                || row.alphabet() != first.alphabet()
            {
                return Err(SequenceError::Alignment(
                    "block rows must share patient, kind, alphabet, reference date and length"
                        .into(),
                ));
            }
        }
        let mut busiest = 0;
        for k in 0..first.len() {
            let mut filled = 0;
            let mut seen_filler = false;
            let mut last_rank = None;
            for row in &rows {
                let s = row.payload()[k];
                if s == FILLER {
                    seen_filler = true;
                    continue;
                }
                if seen_filler {
                    return Err(SequenceError::Structure(format!(
                        "position {}: symbol below a filler cell",
                        k + 1
                    )));
                }
                if kind != InfoKind::Setting {
                    let rank = row.alphabet().rank(s);
                    if last_rank >= rank {
                        return Err(SequenceError::Structure(format!(
                            "position {}: symbols must be distinct and in alphabet order",
                            k + 1
                        )));
                    }
                    last_rank = rank;
                }
                filled += 1;
            }
            busiest = busiest.max(filled);
        }
        if rows.len() != busiest.max(1) {
            return Err(SequenceError::Structure(format!(
                "block has {} rows but its busiest date has {busiest} symbols",
                rows.len()
            )));
        }
        Ok(Self { rows })
    }

    /// Builds a block from per-date symbol lists, stacked in the given order.
    /// Dates must fall inside `[reference_date, reference_date + len - 1]`.
    pub fn from_cells(
        template: &RefSequence,
        cells: &BTreeMap<NaiveDate, Vec<u8>>,
    ) -> Result<Self> {
        let depth = cells.values().map(Vec::len).max().unwrap_or(0).max(1);
        let mut payloads = vec![vec![FILLER; template.len()]; depth];
        for (&date, symbols) in cells {
            let k = template.position_of(date)? - 1;
            for (row, &s) in symbols.iter().enumerate() {
                payloads[row][k] = s;
            }
        }
        let rows = payloads
            .into_iter()
            .map(|p| {
                RefSequence::with_alphabet(
                    template.patient_id(),
                    template.kind(),
                    template.reference_date(),
                    template.alphabet().clone(),
                    p,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn rows(&self) -> &[RefSequence] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn patient_id(&self) -> &str {
        self.rows[0].patient_id()
    }

    pub fn kind(&self) -> InfoKind {
        self.rows[0].kind()
    }

    pub fn reference_date(&self) -> NaiveDate {
        self.rows[0].reference_date()
    }

    pub fn len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coverage(&self) -> DateWindow {
        self.rows[0].coverage()
    }

    /// Non-filler symbols recorded at `date`, top row first.
    pub fn symbols_at(&self, date: NaiveDate) -> Result<Vec<u8>> {
        let k = self.rows[0].position_of(date)? - 1;
        Ok(self.rows.iter().map(|r| r.payload()[k]).take_while(|&s| s != FILLER).collect())
    }

    /// Union of non-filler symbols across rows over `w`.
    pub fn symbols_in(&self, w: &DateWindow) -> Result<BTreeSet<u8>> {
        let range = self.rows[0].index_range(w)?;
        let mut out = BTreeSet::new();
        for row in &self.rows {
            out.extend(row.payload()[range.clone()].iter().copied().filter(|&s| s != FILLER));
        }
        Ok(out)
    }

    /// Count of non-filler cells over `w`.
    pub fn filled_cells(&self, w: &DateWindow) -> Result<usize> {
        let range = self.rows[0].index_range(w)?;
        Ok(self
            .rows
            .iter()
            .map(|r| r.payload()[range.clone()].iter().filter(|&&s| s != FILLER).count())
            .sum())
    }

    /// Dates in `w` with at least one symbol.
    pub fn event_dates(&self, w: &DateWindow) -> Result<Vec<NaiveDate>> {
        let range = self.rows[0].index_range(w)?;
        let top = self.rows[0].payload();
        Ok(range
            .filter(|&k| top[k] != FILLER)
            .map(|k| self.rows[0].date_at(k + 1).expect("index in range"))
            .collect())
    }

    /// Sub-block over `w`, dropping rows that become all filler.
    pub fn slice(&self, w: &DateWindow) -> Result<SequenceBlock> {
        let mut rows = self.rows.iter().map(|r| r.slice(w)).collect::<Result<Vec<_>>>()?;
        while rows.len() > 1 && rows.last().is_some_and(|r| r.payload().iter().all(|&s| s == FILLER)) {
            rows.pop();
        }
        Ok(Self { rows })
    }
}

/// Union of non-filler symbols in `block` over `w`.
pub fn block_symbols_in(block: &SequenceBlock, w: &DateWindow) -> Result<BTreeSet<u8>> {
    block.symbols_in(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn row(s: &str) -> RefSequence {
        RefSequence::new("p", InfoKind::Comorbidity, d(2007, 1, 1), s).unwrap()
    }

    fn three_date_block() -> SequenceBlock {
        // diagnoses {2} on day 2, {5, A} on day 5, {D} on day 9
        SequenceBlock::new(vec![row(".2..5...D."), row("....A.....")]).unwrap()
    }

    #[test]
    fn union_over_windows() {
        let b = three_date_block();
        let all: BTreeSet<u8> = b"25AD".iter().copied().collect();
        assert_eq!(b.symbols_in(&b.coverage()).unwrap(), all);
        let mid = DateWindow::day(d(2007, 1, 5));
        assert_eq!(b.symbols_in(&mid).unwrap(), b"5A".iter().copied().collect());
        assert_eq!(b.symbols_at(d(2007, 1, 5)).unwrap(), b"5A".to_vec());
        assert_eq!(b.filled_cells(&b.coverage()).unwrap(), 4);
        assert_eq!(b.event_dates(&b.coverage()).unwrap().len(), 3);
    }

    #[test]
    fn rejects_non_canonical_layouts() {
        // out of alphabet order
        assert!(SequenceBlock::new(vec![row("A"), row("5")]).is_err());
        // duplicate on one date
        assert!(SequenceBlock::new(vec![row("5"), row("5")]).is_err());
        // symbol under filler
        assert!(SequenceBlock::new(vec![row(".."), row(".5")]).is_err());
        // surplus all-filler row
        assert!(SequenceBlock::new(vec![row("5."), row("..")]).is_err());
        assert!(SequenceBlock::new(vec![]).is_err());
        let bin = RefSequence::binary("p", d(2007, 1, 1), "01").unwrap();
        assert!(SequenceBlock::new(vec![bin]).is_err());
        let shifted = RefSequence::new("p", InfoKind::Comorbidity, d(2007, 1, 2), "A").unwrap();
        assert!(matches!(
            SequenceBlock::new(vec![row("5"), shifted]),
            Err(SequenceError::Alignment(_))
        ));
    }

    #[test]
    fn setting_blocks_may_repeat_letters() {
        let s = |p: &str| RefSequence::new("p", InfoKind::Setting, d(2007, 1, 1), p).unwrap();
        let b = SequenceBlock::new(vec![s("OI"), s("O.")]).unwrap();
        assert_eq!(b.filled_cells(&b.coverage()).unwrap(), 3);
    }

    #[test]
    fn slicing_trims_empty_rows() {
        let b = three_date_block();
        let w = DateWindow::new(d(2007, 1, 8), d(2007, 1, 10)).unwrap();
        let s = b.slice(&w).unwrap();
        assert_eq!(s.row_count(), 1);
        assert_eq!(s.rows()[0].as_str(), ".D.");
        assert!(SequenceBlock::new(s.rows().to_vec()).is_ok());
    }

    #[test]
    fn from_cells_matches_manual_rows() {
        let template = RefSequence::empty("p", InfoKind::Comorbidity, d(2007, 1, 1), 10).unwrap();
        let mut cells = BTreeMap::new();
        cells.insert(d(2007, 1, 2), b"2".to_vec());
        cells.insert(d(2007, 1, 5), b"5A".to_vec());
        cells.insert(d(2007, 1, 9), b"D".to_vec());
        assert_eq!(SequenceBlock::from_cells(&template, &cells).unwrap(), three_date_block());
        let empty = SequenceBlock::from_cells(&template, &BTreeMap::new()).unwrap();
        assert_eq!(empty.row_count(), 1);
    }
}
