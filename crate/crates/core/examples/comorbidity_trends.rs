//! Mean comorbidity index by window length and by quarterly report date
//! for three synthetic cohorts.

use std::collections::BTreeMap;

use tiavseq::ingest::{compile_cohort, resolve_diagnoses, CodeMapping, IngestConfig, IngestReport, UnknownCodePolicy};
use tiavseq::synth::{generate, SynthParams};
use tiavseq::tiav::{fixed_window_trend, growing_window_trend, CciWeights, FixedWindowParams, GrowingWindowParams, PatientHistory};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SynthParams { patients_per_cohort: 30, sparse_first_year: true, ..Default::default() };
    let data = generate(&params);

    let mut raw = BTreeMap::new();
    for d in &data.diagnoses {
        raw.entry(d.patient_id.clone()).or_insert_with(Vec::new).push(d.clone());
    }
    let mapping = CodeMapping::from_pairs(data.mapping.iter().map(|(c, s)| (c.as_str(), *s)))?;
    let mut report = IngestReport::default();
    let dx = resolve_diagnoses(&raw, Some(&mapping), UnknownCodePolicy::Error, &mut report)?;
    let config = IngestConfig::new(params.study_start, params.study_end)?;
    let cohort = compile_cohort(&BTreeMap::new(), &dx, &config)?;

    let histories: Vec<PatientHistory> = cohort
        .patients
        .into_values()
        .map(|p| PatientHistory::new(p.comorbidity.unwrap(), p.setting.unwrap()))
        .collect::<Result<_, _>>()?;

    let weights = CciWeights::default();
    let growing = growing_window_trend(&histories, &GrowingWindowParams::default(), &weights)?;
    for year in &params.cohort_years {
        let means: Vec<String> = growing.cohort(*year).step_by(8).map(|r| format!("{}d:{:.2}", r.window_len, r.mean_cci)).collect();
        println!("cohort {year} growing: {}", means.join("  "));
    }

    let fixed = fixed_window_trend(&histories, &FixedWindowParams::default(), &weights)?;
    for year in &params.cohort_years {
        let util: Vec<String> = fixed.cohort(*year).take(6).map(|r| format!("{}", r.median_utilization)).collect();
        println!("cohort {year} median utilization, first reports: {}", util.join(" "));
    }

    let mut csv = Vec::new();
    fixed.write_csv(&mut csv)?;
    println!("{}", String::from_utf8(csv)?.lines().take(3).collect::<Vec<_>>().join("\n"));
    Ok(())
}
