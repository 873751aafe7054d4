//! Runs the `tiavseq` binary and recomputes its outputs in-process.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tiavseq::cli::{RunConfig, DENSE_STORE, RUNLENGTH_STORE};
use tiavseq::ingest::{
    compile_cohort, parse_diagnoses, parse_prescriptions, resolve_diagnoses, CodeMapping, CompiledCohort,
    IngestConfig, IngestReport,
};
use tiavseq::store::{cohort_records, cohort_runlength_records, write_store};
use tiavseq::tiav::{
    evaluate_eligibility, fixed_window_trend, growing_window_trend, time_varying_covariates, CciWeights,
    FixedWindowParams, GrowingWindowParams, PatientHistory,
};
use tiavseq::{InfoKind, RefSequence};

pub const STAGES: [&str; 5] = ["ingest", "build", "eligibility", "cci-trend", "covariates"];

/// Data files written by a full pipeline run, relative to the output dir.
pub const DATA_FILES: [&str; 10] = [
    "ingest_report.txt",
    "ingest_report.json",
    "store/sequences.tsv",
    "store/sequences.tsv.manifest.json",
    "store/exposures.rl.tsv",
    "store/exposures.rl.tsv.manifest.json",
    "eligibility.csv",
    "cci_growing.csv",
    "cci_fixed.csv",
    "covariates.csv",
];

pub fn tiavseq<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_tiavseq")).args(args).output().expect("binary runs")
}

/// Seeded dataset plus `config.toml` in `dir`; returns the config path.
pub fn generate_fixture(dir: &Path, seed: u64, per_cohort: usize) -> PathBuf {
    let out = tiavseq([
        "generate".as_ref(),
        "--out".as_ref(),
        dir.as_os_str(),
        "--seed".as_ref(),
        seed.to_string().as_ref(),
        "--patients-per-cohort".as_ref(),
        per_cohort.to_string().as_ref(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("config.toml")
}

pub fn run_pipeline(config: &Path, out_dir: &Path) -> Result<(), String> {
    for stage in STAGES {
        let out = tiavseq([
            stage.as_ref(),
            "--config".as_ref(),
            config.as_os_str(),
            "--output-dir".as_ref(),
            out_dir.as_os_str(),
        ]);
        if !out.status.success() {
            return Err(format!("{stage}: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

pub fn compile(cfg: &RunConfig) -> CompiledCohort {
    let ic = IngestConfig::new(cfg.study.start.unwrap(), cfg.study.end.unwrap()).unwrap();
    let rx = parse_prescriptions(cfg.inputs.prescriptions.as_ref().unwrap(), &ic.parse).unwrap();
    let dx = parse_diagnoses(cfg.inputs.diagnoses.as_ref().unwrap(), &ic.parse).unwrap();
    let mapping = CodeMapping::load(cfg.inputs.code_mapping.as_ref().unwrap()).unwrap();
    let mut report = IngestReport::default();
    let resolved = resolve_diagnoses(&dx.by_patient, Some(&mapping), ic.unknown_codes, &mut report).unwrap();
    compile_cohort(&rx.by_patient, &resolved, &ic).unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn same(what: &str, cli: &[u8], direct: &[u8]) -> Result<(), String> {
    if cli == direct {
        Ok(())
    } else {
        Err(format!("{what}: CLI output differs from the in-process result"))
    }
}

/// Recomputes stores, trends, eligibility and covariates with library calls
/// and compares them with the files under `out_dir`.
pub fn check_in_process(config: &Path, out_dir: &Path) -> Result<(), String> {
    let cfg = RunConfig::load(config).unwrap();
    let cohort = compile(&cfg);
    let scratch = tempfile::tempdir().unwrap();

    let dense = scratch.path().join("d.tsv");
    write_store(&cohort_records(&cohort), &dense).unwrap();
    same("dense store", &read(&out_dir.join(DENSE_STORE)), &read(&dense))?;
    let rl = scratch.path().join("r.tsv");
    write_store(&cohort_runlength_records(&cohort).unwrap(), &rl).unwrap();
    same("run-length store", &read(&out_dir.join(RUNLENGTH_STORE)), &read(&rl))?;

    let histories: Vec<PatientHistory> = cohort
        .patients
        .values()
        .filter_map(|p| Some(PatientHistory::new(p.comorbidity.clone()?, p.setting.clone()?).unwrap()))
        .collect();
    let w = CciWeights::default();
    let t = &cfg.trend;
    let growing = growing_window_trend(
        &histories,
        &GrowingWindowParams { min_len: t.min_len, max_len: t.max_len, step: t.step },
        &w,
    )
    .unwrap();
    let mut buf = Vec::new();
    growing.write_csv(&mut buf).unwrap();
    same("growing trend", &read(&out_dir.join("cci_growing.csv")), &buf)?;
    let fixed =
        fixed_window_trend(&histories, &FixedWindowParams { window_len: t.window_len, step: t.step, until: None }, &w)
            .unwrap();
    let mut buf = Vec::new();
    fixed.write_csv(&mut buf).unwrap();
    same("fixed trend", &read(&out_dir.join("cci_fixed.csv")), &buf)?;

    let e = &cfg.eligibility;
    let mut rdr = csv::Reader::from_path(out_dir.join("eligibility.csv")).unwrap();
    let rows: BTreeMap<String, (String, String)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), (r[1].to_string(), r[2].to_string()))
        })
        .collect();
    for (id, p) in &cohort.patients {
        let Some(aug) = p.exposures.get(&e.augmenting) else { continue };
        let fl = p.exposures.get(&e.first_line).cloned().unwrap_or_else(|| {
            RefSequence::empty(id.clone(), InfoKind::Exposure, aug.reference_date(), aug.len()).unwrap()
        });
        let r = evaluate_eligibility(aug, &fl, &e.params()).unwrap();
        let want = (r.eligible.to_string(), r.index_date.map(|d| d.to_string()).unwrap_or_default());
        if rows.get(id) != Some(&want) {
            return Err(format!("eligibility of {id}: CLI {:?}, in-process {want:?}", rows.get(id)));
        }
    }

    let mut dates: BTreeMap<String, Vec<chrono::NaiveDate>> = BTreeMap::new();
    let mut rdr = csv::Reader::from_path(cfg.inputs.measurement_dates.as_ref().unwrap()).unwrap();
    for r in rdr.records() {
        let r = r.unwrap();
        dates.entry(r[0].to_string()).or_default().push(r[1].parse().unwrap());
    }
    let mut expected = String::new();
    for (id, ds) in &dates {
        let Some(p) = cohort.patients.get(id).filter(|p| !p.exposures.is_empty()) else { continue };
        let named: Vec<(&str, &RefSequence)> = p.exposures.iter().map(|(m, s)| (m.as_str(), s)).collect();
        let table = time_varying_covariates(ds, &named, cfg.covariates.width, cfg.covariates.summary).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf, Some(("patient_id", id))).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        if expected.is_empty() {
            expected.push_str(header);
            expected.push('\n');
        }
        for l in lines {
            expected.push_str(l);
            expected.push('\n');
        }
    }
    same("covariates", &read(&out_dir.join("covariates.csv")), expected.as_bytes())
}
