//! Parsing event files, mapping raw diagnosis codes and compiling
//! sequences, with the ingest report of rejected rows.

use std::io::Cursor;

use chrono::NaiveDate;
use tiavseq::ingest::{
    compile_cohort, parse_diagnoses_from, parse_prescriptions_from, resolve_diagnoses, CodeMapping, IngestConfig,
    UnknownCodePolicy,
};

const PRESCRIPTIONS: &str = "\
patient_id,medication_id,release_date,days_supply
p1,M1,2010-07-30,30
p1,M1,2010-08-25,30
p1,M2,2010-09-01,0
p2,M1,2010-10-01,90
";

const DIAGNOSES: &str = "\
patient_id,diagnosis_date,code,setting
p1,2009-03-02,290.0,O
p1,2010-08-01,428.0,I
p1,2010-08-01,428.0,O
p2,2010-11-15,999.9,O
";

const MAPPING: &str = "code,symbol\n290.0,5\n428.0,2\n";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
    let mut config = IngestConfig::new(d(2010, 1, 1), d(2010, 12, 31))?;
    config.unknown_codes = UnknownCodePolicy::SkipWithReport;

    let rx = parse_prescriptions_from(Cursor::new(PRESCRIPTIONS), "prescriptions", &config.parse)?;
    let dx = parse_diagnoses_from(Cursor::new(DIAGNOSES), "diagnoses", &config.parse)?;
    let mapping = CodeMapping::from_reader(Cursor::new(MAPPING), "mapping")?;

    let mut report = rx.report;
    report.merge(dx.report);
    let resolved = resolve_diagnoses(&dx.by_patient, Some(&mapping), config.unknown_codes, &mut report)?;
    let cohort = compile_cohort(&rx.by_patient, &resolved, &config)?;
    report.merge(cohort.report);

    for (id, p) in &cohort.patients {
        for (med, seq) in &p.exposures {
            println!("{id} {med} from {}: {} days on", seq.reference_date(), seq.count_ones(&seq.coverage())?);
        }
        if let Some(b) = &p.comorbidity {
            println!("{id} comorbidity block from {}, {} row(s)", b.reference_date(), b.row_count());
        }
    }
    print!("{}", report.to_text());
    for r in &report.rejected {
        println!("  {}:{} {}", r.source, r.line, r.reason);
    }
    Ok(())
}
