use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::block::SequenceBlock;
use crate::codes::{Comorbidity, InfoKind};
use crate::error::{Result, SequenceError};
use crate::window::DateWindow;

/// Per-category weights plus the mild/severe pairs where only the severe
/// form counts when both are present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CciWeights {
    weights: BTreeMap<Comorbidity, u32>,
    hierarchy: Vec<(Comorbidity, Comorbidity)>,
    apply_hierarchy: bool,
}

impl Default for CciWeights {
    /// Original Charlson weights over the 17 enhanced categories.
    fn default() -> Self {
        use Comorbidity::*;
        let weights = Comorbidity::ALL
            .iter()
            .map(|&c| {
                let w = match c {
                    DiabetesWithComplication | HemiplegiaOrParaplegia | RenalDisease | Malignancy => 2,
                    ModerateOrSevereLiverDisease => 3,
                    MetastaticSolidTumor | AidsHiv => 6,
                    _ => 1,
                };
                (c, w)
            })
            .collect();
        Self {
            weights,
            hierarchy: vec![
                (MildLiverDisease, ModerateOrSevereLiverDisease),
                (DiabetesWithoutComplication, DiabetesWithComplication),
                (Malignancy, MetastaticSolidTumor),
            ],
            apply_hierarchy: true,
        }
    }
}

impl CciWeights {
    /// Replaces weights of the given symbols. Fails when the result would
    /// let a severe form weigh less than its mild form.
    pub fn with_overrides(mut self, overrides: &BTreeMap<char, u32>) -> Result<Self> {
        for (&symbol, &w) in overrides {
            let c = u8::try_from(symbol)
                .ok()
                .and_then(Comorbidity::from_symbol)
                .ok_or(SequenceError::InvalidSymbol { symbol, kind: InfoKind::Comorbidity })?;
            self.weights.insert(c, w);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn with_hierarchy(mut self, apply: bool) -> Self {
        self.apply_hierarchy = apply;
        self
    }

    pub fn hierarchy_applied(&self) -> bool {
        self.apply_hierarchy
    }

    fn validate(&self) -> Result<()> {
        for &(mild, severe) in &self.hierarchy {
            if self.weight(severe) < self.weight(mild) {
                return Err(SequenceError::Parameter(format!(
                    "weight of {} ({}) is below weight of {} ({})",
                    severe.symbol() as char,
                    self.weight(severe),
                    mild.symbol() as char,
                    self.weight(mild)
                )));
            }
        }
        Ok(())
    }

    pub fn weight(&self, c: Comorbidity) -> u32 {
        self.weights.get(&c).copied().unwrap_or(0)
    }

    /// Weighted sum over a set of category symbols; non-category symbols
    /// are ignored.
    pub fn score(&self, symbols: &BTreeSet<u8>) -> u32 {
        let present: BTreeSet<Comorbidity> =
            symbols.iter().filter_map(|&s| Comorbidity::from_symbol(s)).collect();
        present
            .iter()
            .filter(|&&c| {
                !(self.apply_hierarchy
                    && self
                        .hierarchy
                        .iter()
                        .any(|&(mild, severe)| mild == c && present.contains(&severe)))
            })
            .map(|&c| self.weight(c))
            .sum()
    }
}

fn require_kind(block: &SequenceBlock, kind: InfoKind) -> Result<()> {
    if block.kind() == kind {
        Ok(())
    } else {
        Err(SequenceError::KindMismatch { expected: kind, found: block.kind() })
    }
}

/// Comorbidity index over the categories recorded in `w`.
pub fn cci(block: &SequenceBlock, w: &DateWindow, weights: &CciWeights) -> Result<u32> {
    require_kind(block, InfoKind::Comorbidity)?;
    Ok(weights.score(&block.symbols_in(w)?))
}

/// Count of inpatient and outpatient cells in `w`.
pub fn utilization(setting_block: &SequenceBlock, w: &DateWindow) -> Result<usize> {
    require_kind(setting_block, InfoKind::Setting)?;
    setting_block.filled_cells(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::RefSequence;
    use chrono::NaiveDate;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2007, 1, day).unwrap()
    }

    fn block(kind: InfoKind, rows: &[&str]) -> SequenceBlock {
        SequenceBlock::new(rows.iter().map(|r| RefSequence::new("p", kind, d(1), *r).unwrap()).collect())
            .unwrap()
    }

    fn set(s: &[u8]) -> BTreeSet<u8> {
        s.iter().copied().collect()
    }

    #[test]
    fn default_table() {
        let w = CciWeights::default();
        let sum: u32 = Comorbidity::ALL.iter().map(|&c| w.weight(c)).sum();
        // ten 1s, four 2s, one 3, two 6s
        assert_eq!(sum, 10 + 8 + 3 + 12);
        assert_eq!(w.score(&set(b"5")), 1);
        assert_eq!(w.score(&set(b"EG")), 6);
        assert_eq!(w.score(&set(b"9F")), 3);
        assert_eq!(w.score(&set(b"AB")), 2);
        assert_eq!(w.score(&set(b"")), 0);
        assert_eq!(w.clone().with_hierarchy(false).score(&set(b"EG")), 8);
    }

    #[test]
    fn overrides_are_validated() {
        let mut o = BTreeMap::new();
        o.insert('G', 1);
        assert!(CciWeights::default().with_overrides(&o).is_err());
        let mut o = BTreeMap::new();
        o.insert('H', 10);
        let w = CciWeights::default().with_overrides(&o).unwrap();
        assert_eq!(w.score(&set(b"H")), 10);
        let mut o = BTreeMap::new();
        o.insert('Z', 1);
        assert!(CciWeights::default().with_overrides(&o).is_err());
    }

    #[test]
    fn block_windows() {
        let b = block(InfoKind::Comorbidity, &[".2..5...D.", "....A....."]);
        let w = CciWeights::default();
        assert_eq!(cci(&b, &b.coverage(), &w).unwrap(), 1 + 1 + 1 + 2);
        assert_eq!(cci(&b, &DateWindow::day(d(5)), &w).unwrap(), 2);
        assert_eq!(cci(&b, &DateWindow::day(d(1)), &w).unwrap(), 0);

        let s = block(InfoKind::Setting, &[".O..I...O.", "....O....."]);
        assert_eq!(utilization(&s, &s.coverage()).unwrap(), 4);
        assert_eq!(utilization(&s, &DateWindow::day(d(10))).unwrap(), 0);
        assert!(utilization(&b, &b.coverage()).is_err());
        assert!(cci(&s, &s.coverage(), &w).is_err());
    }
}
