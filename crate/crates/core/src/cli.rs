//! Batch front end: `ingest`, `build`, `stats`, `eligibility`, `cci-trend`,
//! `covariates`, `inspect` and the hidden `generate`.
//!
//! Parameters come from a TOML run configuration (`--config`); command-line
//! flags override the corresponding configuration values. Relative paths in
//! the configuration are resolved against the configuration file's
//! directory, relative paths on the command line against the working
//! directory.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage or configuration error.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::block::SequenceBlock;
use crate::codes::InfoKind;
use crate::ingest::{
    compile_cohort, parse_diagnoses, parse_first_data_dates, parse_prescriptions, resolve_diagnoses,
    CodeMapping, CompiledCohort, FirstDataSource, IngestConfig, IngestReport, UnknownCodePolicy,
};
use crate::sequence::RefSequence;
use crate::store::{
    assemble_blocks, cohort_records, cohort_runlength_records, compute_stats, read_store, write_store,
    RecordFilter, SequenceRecord, COMORBIDITY_LABEL, SETTING_LABEL,
};
use crate::synth::{self, SynthParams};
use crate::tiav::{
    evaluate_eligibility, fixed_window_trend, growing_window_trend, time_varying_covariates, CciWeights,
    CovariateSummary, EligibilityParams, FixedWindowParams, GrowingWindowParams, PatientHistory,
};
use crate::window::DateWindow;
use crate::PatientId;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Dense store file under the output directory.
pub const DENSE_STORE: &str = "store/sequences.tsv";
/// Run-length exposure store file under the output directory.
pub const RUNLENGTH_STORE: &str = "store/exposures.rl.tsv";

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn date_arg(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("{s:?}: {e} (expected YYYY-MM-DD)"))
}

#[derive(Debug, Parser)]
#[command(name = "tiavseq", version, about = "Referenced daily-state sequences from clinical event files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate event files; write the ingest report.
    Ingest(CommonArgs),
    /// Compile sequences and write the dense and run-length stores.
    Build(CommonArgs),
    /// Compare raw event bytes with store bytes.
    Stats(CommonArgs),
    /// Find index dates and apply the four inclusion criteria.
    Eligibility(EligibilityArgs),
    /// Comorbidity index trends over growing and fixed windows.
    CciTrend(TrendArgs),
    /// Exposure covariates in lookback windows before measurement dates.
    Covariates(CovariateArgs),
    /// Print a patient's sequences aligned on a date axis.
    Inspect(InspectArgs),
    /// Write a seeded synthetic dataset and matching configuration.
    #[command(hide = true)]
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Default, Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_parser = date_arg)]
    study_start: Option<NaiveDate>,
    #[arg(long, value_parser = date_arg)]
    study_end: Option<NaiveDate>,
    /// Prescription CSV: patient_id,medication_id,release_date,days_supply.
    #[arg(long)]
    prescriptions: Option<PathBuf>,
    /// Diagnosis CSV: patient_id,diagnosis_date,code|category,setting.
    #[arg(long)]
    diagnoses: Option<PathBuf>,
    /// Code mapping CSV: code,symbol.
    #[arg(long)]
    code_mapping: Option<PathBuf>,
    /// Per-patient first pharmacy-data dates: patient_id,first_data_date.
    #[arg(long)]
    first_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EligibilityArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    augmenting: Option<String>,
    #[arg(long)]
    first_line: Option<String>,
    #[arg(long)]
    x: Option<u32>,
    #[arg(long)]
    y: Option<u32>,
    #[arg(long)]
    z: Option<u32>,
    #[arg(long)]
    w1: Option<u32>,
    #[arg(long)]
    w2: Option<u32>,
    #[arg(long)]
    u: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrendMode {
    Growing,
    Fixed,
    Both,
}

#[derive(Debug, Args)]
struct TrendArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "both")]
    mode: TrendMode,
    #[arg(long)]
    step: Option<u32>,
    #[arg(long)]
    min_len: Option<u32>,
    #[arg(long)]
    max_len: Option<u32>,
    #[arg(long)]
    window_len: Option<u32>,
    /// Count mild and severe forms of the same condition together.
    #[arg(long)]
    no_hierarchy: bool,
}

#[derive(Debug, Args)]
struct CovariateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// CSV of patient_id,measurement_date.
    #[arg(long)]
    measurement_dates: Option<PathBuf>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long, value_enum)]
    summary: Option<SummaryArg>,
    /// Medication ids to summarize; repeatable. Defaults to all.
    #[arg(long = "medication")]
    medications: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SummaryArg {
    Count,
    Fraction,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    patient: String,
    #[arg(long, value_parser = date_arg)]
    from: Option<NaiveDate>,
    #[arg(long, value_parser = date_arg)]
    to: Option<NaiveDate>,
    /// Append a trailing moving-average table of this width.
    #[arg(long)]
    moving_average: Option<usize>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    patients_per_cohort: usize,
    #[arg(long)]
    sparse_first_year: bool,
}

/// Declarative run configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub study: StudyConfig,
    pub inputs: InputsConfig,
    pub output_dir: Option<PathBuf>,
    /// Upper bound on stockpiled days on hand; unbounded when absent.
    pub stockpile_cap: Option<u32>,
    pub cci: CciConfig,
    pub eligibility: EligibilityConfig,
    pub trend: TrendConfig,
    pub covariates: CovariateConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputsConfig {
    pub prescriptions: Option<PathBuf>,
    pub diagnoses: Option<PathBuf>,
    pub code_mapping: Option<PathBuf>,
    pub first_data: Option<PathBuf>,
    pub measurement_dates: Option<PathBuf>,
    pub unknown_codes: UnknownCodePolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CciConfig {
    pub hierarchy: bool,
    /// Weight overrides keyed by category symbol.
    pub weights: BTreeMap<String, u32>,
}

impl Default for CciConfig {
    fn default() -> Self {
        Self { hierarchy: true, weights: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EligibilityConfig {
    pub augmenting: String,
    pub first_line: String,
    pub x: u32,
    pub y: u32,
    pub z: u32,
    pub w1: u32,
    pub w2: u32,
    pub u: u32,
}

impl Default for EligibilityConfig {
    fn default() -> Self {
        Self {
            augmenting: synth::AUGMENTING.into(),
            first_line: synth::FIRST_LINE.into(),
            x: 0,
            y: 0,
            z: 0,
            w1: 0,
            w2: 0,
            u: 0,
        }
    }
}

impl EligibilityConfig {
    pub fn params(&self) -> EligibilityParams {
        EligibilityParams { x: self.x, y: self.y, z: self.z, w1: self.w1, w2: self.w2, u: self.u }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendConfig {
    pub step: u32,
    pub min_len: u32,
    pub max_len: u32,
    pub window_len: u32,
}

impl Default for TrendConfig {
    fn default() -> Self {
        let g = GrowingWindowParams::default();
        Self { step: g.step, min_len: g.min_len, max_len: g.max_len, window_len: FixedWindowParams::default().window_len }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovariateConfig {
    pub width: u32,
    pub summary: CovariateSummary,
    pub medications: Vec<String>,
}

impl Default for CovariateConfig {
    fn default() -> Self {
        Self { width: 30, summary: CovariateSummary::Fraction, medications: Vec::new() }
    }
}

impl RunConfig {
    /// Reads a configuration and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        rebase(&mut cfg.inputs.prescriptions);
        rebase(&mut cfg.inputs.diagnoses);
        rebase(&mut cfg.inputs.code_mapping);
        rebase(&mut cfg.inputs.first_data);
        rebase(&mut cfg.inputs.measurement_dates);
        rebase(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn apply(&mut self, a: &CommonArgs) {
        let set = |dst: &mut Option<PathBuf>, src: &Option<PathBuf>| {
            if src.is_some() {
                dst.clone_from(src);
            }
        };
        set(&mut self.output_dir, &a.output_dir);
        set(&mut self.inputs.prescriptions, &a.prescriptions);
        set(&mut self.inputs.diagnoses, &a.diagnoses);
        set(&mut self.inputs.code_mapping, &a.code_mapping);
        set(&mut self.inputs.first_data, &a.first_data);
        if a.study_start.is_some() {
            self.study.start = a.study_start;
        }
        if a.study_end.is_some() {
            self.study.end = a.study_end;
        }
    }

    fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn weights(&self) -> Result<CciWeights, String> {
        let mut overrides = BTreeMap::new();
        for (k, &v) in &self.cci.weights {
            let mut chars = k.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => {
                    overrides.insert(c, v);
                }
                _ => return Err(format!("cci weight key {k:?} must be a single category symbol")),
            }
        }
        CciWeights::default()
            .with_overrides(&overrides)
            .map(|w| w.with_hierarchy(self.cci.hierarchy))
            .map_err(|e| e.to_string())
    }

    /// Every violation for the given stage, not just the first.
    fn violations(&self, needs_events: bool) -> Vec<String> {
        let mut v = Vec::new();
        match (self.study.start, self.study.end) {
            (Some(s), Some(e)) if s > e => v.push(format!("study start {s} is after study end {e}")),
            (None, _) if needs_events => v.push("study start is not set".into()),
            (_, None) if needs_events => v.push("study end is not set".into()),
            _ => {}
        }
        if needs_events {
            if self.inputs.prescriptions.is_none() && self.inputs.diagnoses.is_none() {
                v.push("no prescription or diagnosis input given".into());
            }
            for (name, p) in [
                ("prescriptions", &self.inputs.prescriptions),
                ("diagnoses", &self.inputs.diagnoses),
                ("code_mapping", &self.inputs.code_mapping),
                ("first_data", &self.inputs.first_data),
            ] {
                if let Some(p) = p {
                    if !p.is_file() {
                        v.push(format!("{name} file {} does not exist", p.display()));
                    }
                }
            }
        }
        if let Err(e) = self.eligibility.params().validate() {
            v.push(format!("eligibility: {e}"));
        }
        if let Err(e) = self.weights() {
            v.push(e);
        }
        let t = &self.trend;
        if t.step == 0 || t.min_len == 0 || t.window_len == 0 {
            v.push("trend step, min_len and window_len must be at least 1".into());
        }
        if t.min_len > t.max_len {
            v.push(format!("trend min_len {} exceeds max_len {}", t.min_len, t.max_len));
        }
        if self.covariates.width == 0 {
            v.push("covariate width must be at least 1".into());
        }
        v
    }
}

fn load_config(a: &CommonArgs) -> CliResult<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p).map_err(CliError::Usage)?,
        None => RunConfig::default(),
    };
    cfg.apply(a);
    Ok(cfg)
}

fn check(cfg: &RunConfig, needs_events: bool) -> CliResult<()> {
    let v = cfg.violations(needs_events);
    if v.is_empty() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("configuration invalid:\n  - {}", v.join("\n  - "))))
    }
}

/// Runs one invocation and returns its exit code. Diagnostics go to
/// standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Build(a) => cmd_build(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Eligibility(a) => cmd_eligibility(&a),
        Command::CciTrend(a) => cmd_trend(&a),
        Command::Covariates(a) => cmd_covariates(&a),
        Command::Inspect(a) => cmd_inspect(&a),
        Command::Generate(a) => cmd_generate(&a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn ingest_config(cfg: &RunConfig) -> CliResult<IngestConfig> {
    let (start, end) = (cfg.study.start.expect("validated"), cfg.study.end.expect("validated"));
    let mut ic = IngestConfig::new(start, end).map_err(|e| CliError::Usage(e.to_string()))?;
    ic.unknown_codes = cfg.inputs.unknown_codes;
    ic.stockpile.cap = cfg.stockpile_cap;
    if let Some(p) = &cfg.inputs.first_data {
        ic.first_data = FirstDataSource::Table(parse_first_data_dates(p).map_err(CliError::runtime)?);
    }
    Ok(ic)
}

/// Parses, maps and compiles the configured inputs.
fn compile(cfg: &RunConfig) -> CliResult<CompiledCohort> {
    let ic = ingest_config(cfg)?;
    let mut report = IngestReport::default();
    let prescriptions = match &cfg.inputs.prescriptions {
        Some(p) => {
            let parsed = parse_prescriptions(p, &ic.parse).map_err(CliError::runtime)?;
            report.merge(parsed.report);
            parsed.by_patient
        }
        None => BTreeMap::new(),
    };
    let diagnoses = match &cfg.inputs.diagnoses {
        Some(p) => {
            let parsed = parse_diagnoses(p, &ic.parse).map_err(CliError::runtime)?;
            report.merge(parsed.report);
            let mapping = match &cfg.inputs.code_mapping {
                Some(m) => Some(CodeMapping::load(m).map_err(CliError::runtime)?),
                None => None,
            };
            resolve_diagnoses(&parsed.by_patient, mapping.as_ref(), ic.unknown_codes, &mut report)
                .map_err(CliError::runtime)?
        }
        None => BTreeMap::new(),
    };
    let mut cohort = compile_cohort(&prescriptions, &diagnoses, &ic).map_err(CliError::runtime)?;
    report.merge(std::mem::take(&mut cohort.report));
    cohort.report = report;
    log::info!("compiled {} patients", cohort.patients.len());
    Ok(cohort)
}

fn write_report(out: &Path, report: &IngestReport) -> CliResult<()> {
    write_file(&out.join("ingest_report.txt"), report.to_text().as_bytes())?;
    let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    write_file(&out.join("ingest_report.json"), json.as_bytes())
}

fn cmd_ingest(a: &CommonArgs) -> CliResult<()> {
    let cfg = load_config(a)?;
    check(&cfg, true)?;
    let cohort = compile(&cfg)?;
    write_report(&cfg.output_dir(), &cohort.report)?;
    eprint!("{}", cohort.report.to_text());
    Ok(())
}

fn cmd_build(a: &CommonArgs) -> CliResult<()> {
    let cfg = load_config(a)?;
    check(&cfg, true)?;
    let cohort = compile(&cfg)?;
    let out = cfg.output_dir();
    write_report(&out, &cohort.report)?;
    let dense = write_store(&cohort_records(&cohort), &out.join(DENSE_STORE)).map_err(CliError::runtime)?;
    let rl_records = cohort_runlength_records(&cohort).map_err(CliError::runtime)?;
    let rl = write_store(&rl_records, &out.join(RUNLENGTH_STORE)).map_err(CliError::runtime)?;
    log::info!("stored {} dense and {} run-length records", dense.records, rl.records);
    Ok(())
}

fn cmd_stats(a: &CommonArgs) -> CliResult<()> {
    let cfg = load_config(a)?;
    check(&cfg, false)?;
    let out = cfg.output_dir();
    let raw: Vec<PathBuf> =
        [&cfg.inputs.prescriptions, &cfg.inputs.diagnoses].into_iter().flatten().cloned().collect();
    let stats = compute_stats(&raw, &[out.join(DENSE_STORE), out.join(RUNLENGTH_STORE)])
        .map_err(CliError::runtime)?;
    let json = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
    write_file(&out.join("store_stats.json"), json.as_bytes())?;
    print!("{}", stats.to_text());
    Ok(())
}

/// Dense store records grouped by patient.
fn load_store(cfg: &RunConfig, filter: &RecordFilter) -> CliResult<BTreeMap<PatientId, Vec<SequenceRecord>>> {
    let path = cfg.output_dir().join(DENSE_STORE);
    if !path.is_file() {
        return Err(CliError::Runtime(format!("{} not found; run `build` first", path.display())));
    }
    let mut out: BTreeMap<PatientId, Vec<SequenceRecord>> = BTreeMap::new();
    for r in read_store(&path, filter).map_err(CliError::runtime)? {
        out.entry(r.patient_id.clone()).or_default().push(r);
    }
    Ok(out)
}

fn exposure(records: &[SequenceRecord], label: &str) -> CliResult<Option<RefSequence>> {
    records
        .iter()
        .find(|r| r.kind == InfoKind::Exposure && r.label == label)
        .map(|r| r.to_sequence().map_err(CliError::runtime))
        .transpose()
}

fn cmd_eligibility(a: &EligibilityArgs) -> CliResult<()> {
    let mut cfg = load_config(&a.common)?;
    let e = &mut cfg.eligibility;
    if let Some(v) = &a.augmenting {
        e.augmenting.clone_from(v);
    }
    if let Some(v) = &a.first_line {
        e.first_line.clone_from(v);
    }
    for (dst, src) in [
        (&mut e.x, a.x),
        (&mut e.y, a.y),
        (&mut e.z, a.z),
        (&mut e.w1, a.w1),
        (&mut e.w2, a.w2),
        (&mut e.u, a.u),
    ] {
        if let Some(v) = src {
            *dst = v;
        }
    }
    check(&cfg, false)?;
    let e = &cfg.eligibility;
    let params = e.params();
    let filter = RecordFilter::all().kind(InfoKind::Exposure).label(&e.augmenting).label(&e.first_line);
    let store = load_store(&cfg, &filter)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "patient_id", "eligible", "index_date", "candidates_tested", "free_days_pre", "max_on_in_window",
        "firstline_pre", "firstline_post", "overlap_post", "c1", "c2", "c3", "c4", "note",
    ];
    w.write_record(header).map_err(CliError::runtime)?;
    for (id, records) in &store {
        let aug = exposure(records, &e.augmenting)?;
        let fl = exposure(records, &e.first_line)?;
        let (aug, fl, note) = match (aug, fl) {
            (Some(a), Some(f)) => (a, f, String::new()),
            (Some(a), None) => {
                let f = RefSequence::empty(id.clone(), InfoKind::Exposure, a.reference_date(), a.len())
                    .map_err(CliError::runtime)?;
                (a, f, format!("no {} record; treated as unexposed", e.first_line))
            }
            (None, _) => {
                let mut row = vec![id.clone(), "false".into()];
                row.extend(std::iter::repeat_n(String::new(), header.len() - 3));
                row.push(format!("no {} record", e.augmenting));
                w.write_record(&row).map_err(CliError::runtime)?;
                continue;
            }
        };
        let r = evaluate_eligibility(&aug, &fl, &params).map_err(CliError::runtime)?;
        let mut row = vec![
            id.clone(),
            r.eligible.to_string(),
            r.index_date.map(|d| d.to_string()).unwrap_or_default(),
            r.candidates_tested.to_string(),
        ];
        match r.evaluation {
            Some(ev) => {
                row.extend(
                    [ev.free_days_pre, ev.max_on_in_window, ev.firstline_pre, ev.firstline_post, ev.overlap_post]
                        .map(|n| n.to_string()),
                );
                row.extend(ev.passed.map(|p| p.to_string()));
            }
            None => row.extend(std::iter::repeat_n(String::new(), 9)),
        }
        row.push(note);
        w.write_record(&row).map_err(CliError::runtime)?;
    }
    let bytes = w.into_inner().map_err(CliError::runtime)?;
    write_file(&cfg.output_dir().join("eligibility.csv"), &bytes)
}

/// Comorbidity and setting blocks of every patient in the store.
fn histories(cfg: &RunConfig) -> CliResult<Vec<PatientHistory>> {
    let filter = RecordFilter::all().label(COMORBIDITY_LABEL).label(SETTING_LABEL);
    let records: Vec<SequenceRecord> = load_store(cfg, &filter)?.into_values().flatten().collect();
    let mut blocks: BTreeMap<(PatientId, String), SequenceBlock> =
        assemble_blocks(&records).map_err(CliError::runtime)?;
    let ids: BTreeSet<PatientId> = blocks.keys().map(|(id, _)| id.clone()).collect();
    let mut out = Vec::new();
    for id in ids {
        let c = blocks.remove(&(id.clone(), COMORBIDITY_LABEL.to_string()));
        let s = blocks.remove(&(id.clone(), SETTING_LABEL.to_string()));
        match (c, s) {
            (Some(c), Some(s)) => out.push(PatientHistory::new(c, s).map_err(CliError::runtime)?),
            _ => return Err(CliError::Runtime(format!("patient {id} lacks a comorbidity or setting block"))),
        }
    }
    Ok(out)
}

fn cmd_trend(a: &TrendArgs) -> CliResult<()> {
    let mut cfg = load_config(&a.common)?;
    let t = &mut cfg.trend;
    for (dst, src) in [(&mut t.step, a.step), (&mut t.min_len, a.min_len), (&mut t.max_len, a.max_len), (&mut t.window_len, a.window_len)] {
        if let Some(v) = src {
            *dst = v;
        }
    }
    if a.no_hierarchy {
        cfg.cci.hierarchy = false;
    }
    check(&cfg, false)?;
    let weights = cfg.weights().map_err(CliError::Usage)?;
    let patients = histories(&cfg)?;
    let t = &cfg.trend;
    let out = cfg.output_dir();
    if matches!(a.mode, TrendMode::Growing | TrendMode::Both) {
        let params = GrowingWindowParams { min_len: t.min_len, max_len: t.max_len, step: t.step };
        let table = growing_window_trend(&patients, &params, &weights).map_err(CliError::runtime)?;
        let mut buf = Vec::new();
        table.write_csv(&mut buf).map_err(CliError::runtime)?;
        write_file(&out.join("cci_growing.csv"), &buf)?;
    }
    if matches!(a.mode, TrendMode::Fixed | TrendMode::Both) {
        let params = FixedWindowParams { window_len: t.window_len, step: t.step, until: None };
        let table = fixed_window_trend(&patients, &params, &weights).map_err(CliError::runtime)?;
        let mut buf = Vec::new();
        table.write_csv(&mut buf).map_err(CliError::runtime)?;
        write_file(&out.join("cci_fixed.csv"), &buf)?;
    }
    Ok(())
}

/// `patient_id,measurement_date` rows grouped by patient, dates in file
/// order.
fn read_measurement_dates(path: &Path) -> CliResult<BTreeMap<PatientId, Vec<NaiveDate>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(CliError::runtime)?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Runtime(format!("{}: missing column {name}", path.display()))
        })
    };
    let (pi, di) = (col("patient_id")?, col("measurement_date")?);
    let mut out: BTreeMap<PatientId, Vec<NaiveDate>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(CliError::runtime)?;
        let line = rec.position().map_or(0, |p| p.line());
        let (Some(id), Some(d)) = (rec.get(pi), rec.get(di)) else {
            return Err(CliError::Runtime(format!("{}:{line}: missing field", path.display())));
        };
        let d = date_arg(d).map_err(|e| CliError::Runtime(format!("{}:{line}: {e}", path.display())))?;
        out.entry(id.to_string()).or_default().push(d);
    }
    Ok(out)
}

fn cmd_covariates(a: &CovariateArgs) -> CliResult<()> {
    let mut cfg = load_config(&a.common)?;
    if a.measurement_dates.is_some() {
        cfg.inputs.measurement_dates.clone_from(&a.measurement_dates);
    }
    if let Some(w) = a.width {
        cfg.covariates.width = w;
    }
    if let Some(s) = a.summary {
        cfg.covariates.summary = match s {
            SummaryArg::Count => CovariateSummary::Count,
            SummaryArg::Fraction => CovariateSummary::Fraction,
        };
    }
    if !a.medications.is_empty() {
        cfg.covariates.medications.clone_from(&a.medications);
    }
    check(&cfg, false)?;
    let Some(dates_path) = cfg.inputs.measurement_dates.clone() else {
        return Err(CliError::Usage("covariates needs measurement dates (--measurement-dates)".into()));
    };
    if !dates_path.is_file() {
        return Err(CliError::Usage(format!("measurement dates file {} does not exist", dates_path.display())));
    }
    let dates = read_measurement_dates(&dates_path)?;
    let mut filter = RecordFilter::all().kind(InfoKind::Exposure);
    for m in &cfg.covariates.medications {
        filter = filter.label(m);
    }
    let store = load_store(&cfg, &filter)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    crate::tiav::write_covariate_header(&mut w, Some("patient_id")).map_err(CliError::runtime)?;
    for (id, ds) in &dates {
        let seqs: Vec<(String, RefSequence)> = store
            .get(id)
            .map(|rs| rs.iter().map(|r| Ok((r.label.clone(), r.to_sequence()?))).collect())
            .transpose()
            .map_err(|e: crate::SequenceError| CliError::runtime(e))?
            .unwrap_or_default();
        if seqs.is_empty() {
            log::warn!("patient {id} has no exposure sequences; skipped");
            continue;
        }
        let named: Vec<(&str, &RefSequence)> = seqs.iter().map(|(l, s)| (l.as_str(), s)).collect();
        let table = time_varying_covariates(ds, &named, cfg.covariates.width, cfg.covariates.summary)
            .map_err(CliError::runtime)?;
        crate::tiav::write_covariate_rows(&mut w, &table, Some(id)).map_err(CliError::runtime)?;
    }
    let bytes = w.into_inner().map_err(CliError::runtime)?;
    write_file(&cfg.output_dir().join("covariates.csv"), &bytes)
}

/// Month-start guides: a label line and a tick line over `range`.
fn date_guides(range: &DateWindow, indent: usize) -> (String, String) {
    let mut labels = " ".repeat(indent);
    let mut ticks = " ".repeat(indent);
    let mut next_free = 0;
    for (i, d) in range.days().enumerate() {
        let first = i == 0 || chrono::Datelike::day(&d) == 1;
        ticks.push(if first { '|' } else { ' ' });
        if first && i >= next_free {
            let label = d.format("%Y-%m-%d").to_string();
            while labels.len() < indent + i {
                labels.push(' ');
            }
            labels.push_str(&label);
            next_free = i + label.len() + 1;
        }
    }
    (labels.trim_end().to_string(), ticks.trim_end().to_string())
}

/// Text rendering of every stored sequence of one patient over `range`,
/// one row per sequence. Uncovered days print as spaces.
pub fn render_patient(records: &[SequenceRecord], range: &DateWindow) -> Result<String, crate::SequenceError> {
    let width = records.iter().map(|r| r.label.len()).max().unwrap_or(0) + 2;
    let (labels, ticks) = date_guides(range, width);
    let mut out = format!("{labels}\n{ticks}\n");
    for r in records {
        let seq = r.to_sequence()?;
        let mut row = format!("{:<width$}", r.label);
        for d in range.days() {
            row.push(seq.symbol_at(d).map_or(' ', char::from));
        }
        let row = row.trim_end().to_string();
        if seq.kind() == InfoKind::Exposure {
            let ones = seq.coverage().intersect(range).map_or(Ok(0), |w| seq.count_ones(&w))?;
            let _ = write!(out, "{row}  ones={ones}");
        } else {
            out.push_str(&row);
        }
        out.push('\n');
    }
    Ok(out)
}

fn cmd_inspect(a: &InspectArgs) -> CliResult<()> {
    let cfg = load_config(&a.common)?;
    check(&cfg, false)?;
    let store = load_store(&cfg, &RecordFilter::all().patient(&a.patient))?;
    let Some(records) = store.get(&a.patient) else {
        return Err(CliError::Runtime(format!("patient {} not found in store", a.patient)));
    };
    let first = records.iter().map(|r| r.reference_date).min().expect("non-empty");
    let last = records
        .iter()
        .map(|r| r.to_sequence().map(|s| s.end_date()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::runtime)?
        .into_iter()
        .max()
        .expect("non-empty");
    let from = a.from.unwrap_or(first);
    let to = a.to.unwrap_or(last);
    let stdout = std::io::stdout();
    let mut o = stdout.lock();
    let range = match DateWindow::new(from, to) {
        Ok(r) if r.intersect(&DateWindow::new(first, last).expect("ordered")).is_some() => r,
        _ => {
            let _ = writeln!(o, "no coverage for patient {} in [{from}, {to}]", a.patient);
            return Ok(());
        }
    };
    let text = render_patient(records, &range).map_err(CliError::runtime)?;
    let _ = writeln!(o, "patient {}  {range}", a.patient);
    let _ = o.write_all(text.as_bytes());
    if let Some(ma) = a.moving_average {
        let _ = writeln!(o, "\nlabel,date,moving_average");
        for r in records.iter().filter(|r| r.kind == InfoKind::Exposure) {
            let seq = r.to_sequence().map_err(CliError::runtime)?;
            for (d, v) in seq.moving_average(ma).map_err(|e| CliError::Usage(e.to_string()))? {
                if range.contains(d) {
                    let _ = writeln!(o, "{},{d},{}", r.label, crate::tiav::fmt_f64(v));
                }
            }
        }
    }
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> CliResult<()> {
    let params = SynthParams {
        seed: a.seed,
        patients_per_cohort: a.patients_per_cohort,
        sparse_first_year: a.sparse_first_year,
        ..SynthParams::default()
    };
    let data = synth::generate(&params);
    let paths = data.write_csv(&a.out).map_err(CliError::runtime)?;
    let mut dates = String::from("patient_id,measurement_date\n");
    for id in data.prescriptions_by_patient().keys() {
        for d in ["2009-03-01", "2011-06-15", "2013-09-30"] {
            let _ = writeln!(dates, "{id},{d}");
        }
    }
    write_file(&a.out.join("measurement_dates.csv"), dates.as_bytes())?;
    let name = |p: &Path| PathBuf::from(p.file_name().expect("file path"));
    let cfg = RunConfig {
        study: StudyConfig { start: Some(params.study_start), end: Some(params.study_end) },
        inputs: InputsConfig {
            prescriptions: Some(name(&paths.prescriptions)),
            diagnoses: Some(name(&paths.diagnoses)),
            code_mapping: Some(name(&paths.mapping)),
            measurement_dates: Some(PathBuf::from("measurement_dates.csv")),
            ..Default::default()
        },
        output_dir: Some(PathBuf::from("out")),
        eligibility: EligibilityConfig { x: 180, y: 20, z: 30, w1: 30, w2: 30, u: 10, ..Default::default() },
        ..Default::default()
    };
    write_file(&a.out.join("config.toml"), cfg.to_toml().as_bytes())
}
