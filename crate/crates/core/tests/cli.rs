//! End-to-end runs of the `tiavseq` binary.

mod common;

use common::pipeline::*;
use common::*;
use tiavseq::store::{read_store, RecordFilter};
use tiavseq::DateWindow;

fn write(path: &std::path::Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn text(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn build_two_fill_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let rx = dir.path().join("rx.csv");
    write(&rx, "patient_id,medication_id,release_date,days_supply\np1,M1,2010-07-30,30\np1,M1,2010-08-25,30\n");
    let out_dir = dir.path().join("out");
    let out = tiavseq([
        "build", "--study-start", "2010-01-01", "--study-end", "2010-12-31",
        "--prescriptions", rx.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = read_store(&out_dir.join("store/sequences.tsv"), &RecordFilter::all().label("M1")).unwrap();
    let seq = recs[0].to_sequence().unwrap();
    let runs = seq.to_runs().unwrap();
    assert_eq!(runs.runs().len(), 1);
    let (start, len) = runs.runs()[0];
    assert_eq!((seq.date_at(start).unwrap(), len), (d(2010, 7, 30), 60));
    assert_eq!(seq.date_at(start + len - 1).unwrap(), d(2010, 9, 27));
}

#[test]
fn vacuous_eligibility() {
    let dir = tempfile::tempdir().unwrap();
    let rx = dir.path().join("rx.csv");
    write(
        &rx,
        "patient_id,medication_id,release_date,days_supply\n\
         p1,FL01,2008-01-01,90\np1,AUG01,2009-03-01,30\n",
    );
    let out_dir = dir.path().join("out");
    let common = [
        "--study-start", "2008-01-01", "--study-end", "2010-12-31",
        "--prescriptions", rx.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap(),
    ];
    assert!(tiavseq(["build"].iter().chain(&common)).status.success());
    let out = tiavseq(["eligibility"].iter().chain(&common));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("eligibility.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("p1,true,2009-03-01,"), "{row}");
}

#[test]
fn generated_pipeline_matches_library_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = generate_fixture(dir.path(), 3, 8);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_pipeline(&config, &a).unwrap();
    run_pipeline(&config, &b).unwrap();
    for f in DATA_FILES {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    check_in_process(&config, &a).unwrap();
}

#[test]
fn inspect_rows_agree_with_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = generate_fixture(dir.path(), 4, 2);
    let out_dir = dir.path().join("out");
    run_pipeline(&config, &out_dir).unwrap();
    let store = out_dir.join("store/sequences.tsv");
    let recs = read_store(&store, &RecordFilter::all().patient("c2003-0001")).unwrap();
    let cfg = config.to_str().unwrap().to_string();
    let args = |extra: &[&'static str]| -> Vec<String> {
        let mut v: Vec<String> = ["inspect", "-c", &cfg, "--patient", "c2003-0001"].map(String::from).into();
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    };
    let out = tiavseq(args(&["--from", "2009-01-01", "--to", "2009-06-30"]));
    assert!(out.status.success());
    let shown = text(&out);
    let range = DateWindow::new(d(2009, 1, 1), d(2009, 6, 30)).unwrap();
    assert!(shown.lines().count() >= 2 + 3);
    for r in recs.iter().filter(|r| r.kind == tiavseq::InfoKind::Exposure) {
        let s = r.to_sequence().unwrap();
        let line = shown.lines().find(|l| l.starts_with(&format!("{} ", r.label))).unwrap();
        let ones = s.coverage().intersect(&range).map_or(0, |w| s.count_symbol(b'1', &w).unwrap());
        assert!(line.ends_with(&format!("ones={ones}")), "{line}");
        let body = line[..line.rfind("  ones=").unwrap()].split_whitespace().nth(1).unwrap_or("");
        assert_eq!(body.bytes().filter(|&b| b == b'1').count(), ones);
    }

    let out = tiavseq(args(&["--from", "1980-01-01", "--to", "1980-12-31"]));
    assert!(out.status.success());
    assert!(text(&out).contains("no coverage"));

    let out = tiavseq(args(&["--moving-average", "30"]));
    assert!(text(&out).contains("label,date,moving_average"));

    let mut missing = args(&[]);
    missing[4] = "nobody".into();
    assert_eq!(tiavseq(missing).status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tiavseq(["frobnicate"]).status.code(), Some(2));
    assert_eq!(tiavseq(["build", "--config", "/nonexistent/config.toml"]).status.code(), Some(2));
    assert_eq!(tiavseq(["build", "--study-start", "2010-01-01"]).status.code(), Some(2));
    let bad_params = tiavseq(["eligibility", "--y", "40", "--z", "30"]);
    assert_eq!(bad_params.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_params.stderr).contains("exceeds"));

    // derivation before build: runtime error
    let out = tiavseq(["cci-trend", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    // unknown diagnosis codes under the default policy: runtime error listing them
    let dx = dir.path().join("dx.csv");
    write(&dx, "patient_id,diagnosis_date,code,setting\np1,2010-02-01,Q1,O\np1,2010-02-02,Q2,O\n");
    let map = dir.path().join("map.csv");
    write(&map, "code,symbol\nZ9,5\n");
    let out = tiavseq([
        "ingest", "--study-start", "2010-01-01", "--study-end", "2010-12-31", "--diagnoses",
        dx.to_str().unwrap(), "--code-mapping", map.to_str().unwrap(), "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Q1") && err.contains("Q2"), "{err}");
}
