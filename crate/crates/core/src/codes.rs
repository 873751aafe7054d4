//! Symbol alphabets and the state function for each information kind.
//!
//! Comorbidity symbols follow Quan's enhanced Charlson categories: digits
//! `1`-`9` then letters `A`-`H`. Setting symbols are `I` (inpatient) and `O`
//! (outpatient). Days without an event in nominal kinds carry [`FILLER`].

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Symbol for "nothing recorded on this day" in nominal sequences.
pub const FILLER: u8 = b'.';

pub const BINARY_ALPHABET: &[u8] = b"01";
pub const COMORBIDITY_ALPHABET: &[u8] = b".123456789ABCDEFGH";
pub const SETTING_ALPHABET: &[u8] = b".IO";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoKind {
    /// Binary daily medication exposure.
    Exposure,
    Comorbidity,
    Setting,
    Custom,
}

impl InfoKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InfoKind::Exposure => "exposure",
            InfoKind::Comorbidity => "comorbidity",
            InfoKind::Setting => "setting",
            InfoKind::Custom => "custom",
        }
    }

    /// Built-in alphabet, `None` for custom sequences.
    pub fn default_alphabet(self) -> Option<Alphabet> {
        let symbols = match self {
            InfoKind::Exposure => BINARY_ALPHABET,
            InfoKind::Comorbidity => COMORBIDITY_ALPHABET,
            InfoKind::Setting => SETTING_ALPHABET,
            InfoKind::Custom => return None,
        };
        Some(Alphabet(Cow::Borrowed(symbols)))
    }

    pub fn is_binary(self) -> bool {
        self == InfoKind::Exposure
    }

    /// Symbol used for days with nothing to record.
    pub fn empty_symbol(self) -> u8 {
        match self {
            InfoKind::Exposure => b'0',
            _ => FILLER,
        }
    }
}

impl fmt::Display for InfoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InfoKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exposure" => Ok(InfoKind::Exposure),
            "comorbidity" => Ok(InfoKind::Comorbidity),
            "setting" => Ok(InfoKind::Setting),
            "custom" => Ok(InfoKind::Custom),
            other => Err(format!("unknown sequence kind {other:?}")),
        }
    }
}

/// Ordered set of single-byte symbols valid in a sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet(Cow<'static, [u8]>);

impl Alphabet {
    /// Custom alphabet; symbols must be distinct printable ASCII other than
    /// tab, comma and colon (reserved by the store format).
    pub fn custom(symbols: &[u8]) -> Option<Self> {
        let mut seen = [false; 128];
        for &s in symbols {
            if !s.is_ascii_graphic() || matches!(s, b',' | b':') || seen[s as usize] {
                return None;
            }
            seen[s as usize] = true;
        }
        (!symbols.is_empty()).then(|| Alphabet(Cow::Owned(symbols.to_vec())))
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn contains(&self, symbol: u8) -> bool {
        self.0.contains(&symbol)
    }

    /// Rank of `symbol` in alphabet order.
    pub fn rank(&self, symbol: u8) -> Option<usize> {
        self.0.iter().position(|&s| s == symbol)
    }
}

/// The 17 conditions of the enhanced Charlson index, keyed by their symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Comorbidity {
    MyocardialInfarction,
    CongestiveHeartFailure,
    PeripheralVascularDisease,
    CerebrovascularDisease,
    Dementia,
    ChronicPulmonaryDisease,
    RheumaticDisease,
    PepticUlcerDisease,
    MildLiverDisease,
    DiabetesWithoutComplication,
    DiabetesWithComplication,
    HemiplegiaOrParaplegia,
    RenalDisease,
    Malignancy,
    ModerateOrSevereLiverDisease,
    MetastaticSolidTumor,
    AidsHiv,
}

impl Comorbidity {
    pub const ALL: [Comorbidity; 17] = [
        Comorbidity::MyocardialInfarction,
        Comorbidity::CongestiveHeartFailure,
        Comorbidity::PeripheralVascularDisease,
        Comorbidity::CerebrovascularDisease,
        Comorbidity::Dementia,
        Comorbidity::ChronicPulmonaryDisease,
        Comorbidity::RheumaticDisease,
        Comorbidity::PepticUlcerDisease,
        Comorbidity::MildLiverDisease,
        Comorbidity::DiabetesWithoutComplication,
        Comorbidity::DiabetesWithComplication,
        Comorbidity::HemiplegiaOrParaplegia,
        Comorbidity::RenalDisease,
        Comorbidity::Malignancy,
        Comorbidity::ModerateOrSevereLiverDisease,
        Comorbidity::MetastaticSolidTumor,
        Comorbidity::AidsHiv,
    ];

    pub fn symbol(self) -> u8 {
        COMORBIDITY_ALPHABET[1 + self as usize]
    }

    pub fn from_symbol(symbol: u8) -> Option<Self> {
        let idx = COMORBIDITY_ALPHABET[1..].iter().position(|&s| s == symbol)?;
        Some(Self::ALL[idx])
    }

    pub fn name(self) -> &'static str {
        match self {
            Comorbidity::MyocardialInfarction => "Myocardial infarction",
            Comorbidity::CongestiveHeartFailure => "Congestive heart failure",
            Comorbidity::PeripheralVascularDisease => "Peripheral vascular disease",
            Comorbidity::CerebrovascularDisease => "Cerebrovascular disease",
            Comorbidity::Dementia => "Dementia",
            Comorbidity::ChronicPulmonaryDisease => "Chronic pulmonary disease",
            Comorbidity::RheumaticDisease => "Rheumatic disease",
            Comorbidity::PepticUlcerDisease => "Peptic ulcer disease",
            Comorbidity::MildLiverDisease => "Mild liver disease",
            Comorbidity::DiabetesWithoutComplication => "Diabetes without chronic complication",
            Comorbidity::DiabetesWithComplication => "Diabetes with chronic complication",
            Comorbidity::HemiplegiaOrParaplegia => "Hemiplegia or paraplegia",
            Comorbidity::RenalDisease => "Renal disease",
            Comorbidity::Malignancy => {
                "Any malignancy, including lymphoma and leukemia, except malignant neoplasm of skin"
            }
            Comorbidity::ModerateOrSevereLiverDisease => "Moderate or severe liver disease",
            Comorbidity::MetastaticSolidTumor => "Metastatic solid tumor",
            Comorbidity::AidsHiv => "AIDS/HIV",
        }
    }
}

impl fmt::Display for Comorbidity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CareSetting {
    Inpatient,
    Outpatient,
}

impl CareSetting {
    pub fn symbol(self) -> u8 {
        match self {
            CareSetting::Inpatient => b'I',
            CareSetting::Outpatient => b'O',
        }
    }

    pub fn from_symbol(symbol: u8) -> Option<Self> {
        match symbol {
            b'I' => Some(CareSetting::Inpatient),
            b'O' => Some(CareSetting::Outpatient),
            _ => None,
        }
    }
}

/// Clinical meaning of one sequence entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClinicalState {
    OnMedication,
    NotOnMedication,
    Diagnosed(Comorbidity),
    Seen(CareSetting),
    /// Filler day in a nominal sequence.
    NoEvent,
    /// Symbol of a custom alphabet, uninterpreted.
    Symbol(char),
}

/// Maps an entry symbol of `kind` to its clinical state.
pub fn state_of(kind: InfoKind, symbol: u8) -> Option<ClinicalState> {
    match (kind, symbol) {
        (InfoKind::Exposure, b'1') => Some(ClinicalState::OnMedication),
        (InfoKind::Exposure, b'0') => Some(ClinicalState::NotOnMedication),
        (InfoKind::Exposure, _) => None,
        (InfoKind::Comorbidity | InfoKind::Setting, FILLER) => Some(ClinicalState::NoEvent),
        (InfoKind::Comorbidity, s) => Comorbidity::from_symbol(s).map(ClinicalState::Diagnosed),
        (InfoKind::Setting, s) => CareSetting::from_symbol(s).map(ClinicalState::Seen),
        (InfoKind::Custom, s) => Some(ClinicalState::Symbol(s as char)),
    }
}

/// Inverse of [`state_of`].
pub fn symbol_of(state: ClinicalState) -> u8 {
    match state {
        ClinicalState::OnMedication => b'1',
        ClinicalState::NotOnMedication => b'0',
        ClinicalState::Diagnosed(c) => c.symbol(),
        ClinicalState::Seen(s) => s.symbol(),
        ClinicalState::NoEvent => FILLER,
        ClinicalState::Symbol(c) => c as u8,
    }
}
