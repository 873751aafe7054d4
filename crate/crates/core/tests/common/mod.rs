//! Independent oracles and random inputs shared by the integration tests
//! and the acceptance suite. Oracles work on plain byte strings and day
//! loops, never on library helpers beyond constructors.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use tiavseq::codes::Comorbidity;
use tiavseq::ingest::{DiagnosisEvent, PrescriptionEvent};
use tiavseq::tiav::EligibilityParams;
use tiavseq::CareSetting;

pub fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

pub fn plus(date: NaiveDate, days: i64) -> NaiveDate {
    date + chrono::Duration::days(days)
}

/// Day-by-day stock counter: supply released on a day is added before that
/// day is consumed; a day is covered while stock remains. Days before
/// `reference` are consumed but not emitted.
pub fn simulate_stockpile(
    fills: &[PrescriptionEvent],
    reference: NaiveDate,
    end: NaiveDate,
    cap: Option<u32>,
) -> Vec<u8> {
    let first = fills.iter().map(|f| f.release_date).min().unwrap_or(reference).min(reference);
    let mut out = Vec::new();
    let mut stock: u64 = 0;
    let mut day = first;
    while day <= end {
        for f in fills.iter().filter(|f| f.release_date == day) {
            stock += u64::from(f.days_supply);
            if let Some(c) = cap {
                stock = stock.min(u64::from(c));
            }
        }
        let on = stock > 0;
        if on {
            stock -= 1;
        }
        if day >= reference {
            out.push(if on { b'1' } else { b'0' });
        }
        day = day.succ_opt().unwrap();
    }
    out
}

/// Fills clustered around a few dates so that same-day and heavily
/// overlapping fills are common.
pub fn random_fills<R: Rng>(rng: &mut R, start: NaiveDate, span: i64) -> Vec<PrescriptionEvent> {
    let anchors: Vec<i64> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(-60..span)).collect();
    (0..rng.gen_range(0..=12))
        .map(|_| {
            let a = *anchors.choose(rng).unwrap();
            PrescriptionEvent {
                patient_id: "p".into(),
                medication_id: "M".into(),
                release_date: plus(start, a + rng.gen_range(0..=40)),
                days_supply: *[1, 7, 14, 30, 30, 90].choose(rng).unwrap(),
            }
        })
        .collect()
}

/// On/off bit string from a two-state chain with mean run lengths
/// `on_len` and `off_len`.
pub fn markov_bits<R: Rng>(rng: &mut R, n: usize, on_len: f64, off_len: f64) -> Vec<u8> {
    let mut on = rng.gen_bool(0.3);
    (0..n)
        .map(|_| {
            let switch = if on { 1.0 / on_len } else { 1.0 / off_len };
            if rng.gen_bool(switch.min(1.0)) {
                on = !on;
            }
            if on {
                b'1'
            } else {
                b'0'
            }
        })
        .collect()
}

/// Largest number of ones in any `z` consecutive positions of
/// `bits[lo..=hi]`, by enumerating every window. Needs `1 <= z <= hi - lo + 1`.
pub fn max_ones_brute(bits: &[u8], z: usize, lo: usize, hi: usize) -> usize {
    let mut best = 0;
    let mut s = lo;
    while s + z <= hi + 1 {
        best = best.max(bits[s..s + z].iter().filter(|&&b| b == b'1').count());
        s += 1;
    }
    best
}

fn ones(bits: &[u8]) -> usize {
    bits.iter().filter(|&&b| b == b'1').count()
}

/// Day loop over every day of the augmenting string: the first day that
/// starts a run of ones, has 365 days before it and 365 days from it, and
/// meets all four thresholds.
pub fn eligibility_oracle(
    aug: &[u8],
    fl: &[u8],
    reference: NaiveDate,
    p: &EligibilityParams,
) -> Option<NaiveDate> {
    let n = aug.len();
    for i in 0..n {
        let starts = aug[i] == b'1' && (i == 0 || aug[i - 1] == b'0');
        if !starts || i < 365 || i + 365 > n {
            continue;
        }
        let (pre, post) = (i - 365..i, i..i + 365);
        let c1 = aug[pre.clone()].iter().filter(|&&b| b == b'0').count() >= p.x as usize;
        let c2 = if p.z == 0 { p.y == 0 } else { max_ones_brute(aug, p.z as usize, i, i + 364) >= p.y as usize };
        let c3 = ones(&fl[pre]) >= p.w1 as usize && ones(&fl[post.clone()]) >= p.w2 as usize;
        let both = post.filter(|&k| aug[k] == b'1' && fl[k] == b'1').count();
        let c4 = both >= p.u as usize;
        if c1 && c2 && c3 && c4 {
            return Some(reference + chrono::Duration::days(i as i64));
        }
    }
    None
}

/// Thresholds spread over their full range but weighted toward small
/// values, so both verdicts are common.
pub fn random_params<R: Rng>(rng: &mut R) -> EligibilityParams {
    let t = |r: &mut R| if r.gen_bool(0.7) { r.gen_range(0..=60) } else { r.gen_range(0..=365) };
    let z = t(rng);
    EligibilityParams { x: t(rng), y: rng.gen_range(0..=z), z, w1: t(rng), w2: t(rng), u: t(rng) }
}

/// Original Charlson weights keyed by category symbol.
pub fn charlson_weights() -> BTreeMap<u8, u32> {
    let mut w: BTreeMap<u8, u32> = b"123456789A".iter().map(|&s| (s, 1)).collect();
    for s in *b"BCDE" {
        w.insert(s, 2);
    }
    w.insert(b'F', 3);
    w.insert(b'G', 6);
    w.insert(b'H', 6);
    w
}

/// Set union of categories diagnosed in `[from, to]`, mild forms dropped
/// when the severe form is present (if `hierarchy`), weights summed.
pub fn cci_oracle(events: &[DiagnosisEvent], from: NaiveDate, to: NaiveDate, hierarchy: bool) -> u32 {
    let mut present: BTreeSet<u8> = events
        .iter()
        .filter(|e| e.diagnosis_date >= from && e.diagnosis_date <= to)
        .map(|e| e.category.symbol())
        .collect();
    if hierarchy {
        for (mild, severe) in [(b'9', b'F'), (b'A', b'B'), (b'E', b'G')] {
            if present.contains(&severe) {
                present.remove(&mild);
            }
        }
    }
    let w = charlson_weights();
    present.iter().map(|s| w[s]).sum()
}

pub fn random_diagnoses<R: Rng>(rng: &mut R, id: &str, start: NaiveDate, span: i64) -> Vec<DiagnosisEvent> {
    (0..rng.gen_range(0..=25))
        .map(|_| DiagnosisEvent {
            patient_id: id.into(),
            diagnosis_date: plus(start, rng.gen_range(0..span)),
            category: *Comorbidity::ALL.choose(rng).unwrap(),
            setting: if rng.gen_bool(0.3) { CareSetting::Inpatient } else { CareSetting::Outpatient },
        })
        .collect()
}

pub fn random_date<R: Rng>(rng: &mut R) -> NaiveDate {
    plus(d(1990, 1, 1), rng.gen_range(0..20_000))
}

/// A random valid record: dense or run-length exposure, a custom-alphabet
/// sequence, or the rows of a comorbidity or setting block.
pub fn random_records<R: Rng>(rng: &mut R, patient: &str) -> Vec<tiavseq::store::SequenceRecord> {
    use tiavseq::codes::Alphabet;
    use tiavseq::ingest::build_comorbidity_block;
    use tiavseq::store::SequenceRecord;
    use tiavseq::{InfoKind, RefSequence};

    let reference = random_date(rng);
    let n = rng.gen_range(1..600);
    let label = format!("L{}", rng.gen_range(0..5));
    match rng.gen_range(0..5) {
        0 | 1 => {
            let bits = markov_bits(rng, n, 10.0, 30.0);
            let s = RefSequence::new(patient, InfoKind::Exposure, reference, bits).unwrap();
            if rng.gen_bool(0.5) {
                vec![SequenceRecord::dense(&label, &s)]
            } else {
                vec![SequenceRecord::runlength(&label, &s.to_runs().unwrap())]
            }
        }
        2 => {
            let alpha = Alphabet::custom(b"abcxyz").unwrap();
            let payload: Vec<u8> = (0..n).map(|_| *b"abcxyz".choose(rng).unwrap()).collect();
            let s = RefSequence::with_alphabet(patient, InfoKind::Custom, reference, alpha, payload).unwrap();
            vec![SequenceRecord::dense(&label, &s)]
        }
        _ => {
            let events = random_diagnoses(rng, patient, reference, n as i64);
            let b = build_comorbidity_block(patient, &events, reference, plus(reference, n as i64 - 1)).unwrap();
            let block = if rng.gen_bool(0.5) { b.comorbidity } else { b.setting };
            SequenceRecord::from_block(&label, &block)
        }
    }
}
pub mod pipeline;
