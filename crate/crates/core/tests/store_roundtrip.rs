mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tiavseq::store::{assemble_blocks, read_store, write_store, RecordFilter, SequenceRecord};
use tiavseq::InfoKind;

fn records(seed: u64, count: usize) -> Vec<SequenceRecord> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let patient = format!("p{}", r.gen_range(0..8));
        out.extend(random_records(&mut r, &patient));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn write_then_read_is_identity(seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tsv");
        let recs = records(seed, 40);
        let m = write_store(&recs, &path).unwrap();
        prop_assert_eq!(m.records, recs.len());
        let back = read_store(&path, &RecordFilter::all()).unwrap();
        prop_assert_eq!(&back, &recs);
        for (a, b) in back.iter().zip(&recs) {
            prop_assert_eq!(a.to_sequence().unwrap(), b.to_sequence().unwrap());
        }
        // rewriting what was read gives the same bytes
        let again = dir.path().join("t.tsv");
        write_store(&back, &again).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn filters_are_conjunctive_subsets(seed in any::<u64>(), p in 0..8u32, l in 0..5u32) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tsv");
        let recs = records(seed, 40);
        write_store(&recs, &path).unwrap();
        let patient = format!("p{p}");
        let label = format!("L{l}");
        let all = read_store(&path, &RecordFilter::all()).unwrap();
        let by_patient = read_store(&path, &RecordFilter::all().patient(&patient)).unwrap();
        let by_label = read_store(&path, &RecordFilter::all().label(&label)).unwrap();
        let both = read_store(&path, &RecordFilter::all().patient(&patient).label(&label)).unwrap();
        prop_assert!(by_patient.iter().all(|r| all.contains(r) && r.patient_id == patient));
        let expect: Vec<_> = by_patient.iter().filter(|r| by_label.contains(r)).cloned().collect();
        prop_assert_eq!(both, expect);
        let exposures = read_store(&path, &RecordFilter::all().kind(InfoKind::Exposure)).unwrap();
        prop_assert_eq!(exposures.len(), all.iter().filter(|r| r.kind == InfoKind::Exposure).count());
    }
}

#[test]
fn dense_and_runlength_decode_equal() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = r.gen_range(1..800);
        let bits = markov_bits(&mut r, n, 5.0, 9.0);
        let s = tiavseq::RefSequence::new("p", InfoKind::Exposure, random_date(&mut r), bits).unwrap();
        let dense = SequenceRecord::dense("m", &s);
        let rl = SequenceRecord::runlength("m", &s.to_runs().unwrap());
        let dense = SequenceRecord::parse_line(&dense.to_line()).unwrap();
        let rl = SequenceRecord::parse_line(&rl.to_line()).unwrap();
        assert_eq!(dense.to_sequence().unwrap(), rl.to_sequence().unwrap());
    }
}

#[test]
fn blocks_reassemble() {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let events = random_diagnoses(&mut r, "p", d(2001, 1, 1), 300);
        let b = tiavseq::ingest::build_comorbidity_block("p", &events, d(2001, 1, 1), d(2001, 12, 31)).unwrap();
        let mut recs = SequenceRecord::from_block("charlson", &b.comorbidity);
        recs.extend(SequenceRecord::from_block("setting", &b.setting));
        let lines: Vec<_> = recs.iter().map(|r| SequenceRecord::parse_line(&r.to_line()).unwrap()).collect();
        let blocks = assemble_blocks(&lines).unwrap();
        assert_eq!(blocks[&("p".to_string(), "charlson".to_string())], b.comorbidity);
        assert_eq!(blocks[&("p".to_string(), "setting".to_string())], b.setting);
    }
}

#[test]
fn malformed_line_reports_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.tsv");
    write_store(&records(1, 5), &path).unwrap();
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("p\texposure\tM\t2001-01-01\tdense\t2\t0x\n");
    let lines = text.lines().count();
    std::fs::write(&path, &text).unwrap();
    // refresh the checksum so only the bad line is at fault
    let mpath = tiavseq::store::manifest_path(&path);
    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&mpath).unwrap()).unwrap();
    use sha2::Digest;
    m["checksum"] = hex::encode(sha2::Sha256::digest(text.as_bytes())).into();
    std::fs::write(&mpath, m.to_string()).unwrap();
    let err = read_store(&path, &RecordFilter::all()).unwrap_err().to_string();
    assert!(err.contains(&format!(":{lines}:")), "{err}");
}
