//! Early refills carry the unused supply forward.

use chrono::NaiveDate;
use tiavseq::ingest::{build_exposure, PrescriptionEvent, StockpileOptions};
use tiavseq::DateWindow;

fn fill(date: NaiveDate, days_supply: u32) -> PrescriptionEvent {
    PrescriptionEvent { patient_id: "p1".into(), medication_id: "M1".into(), release_date: date, days_supply }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
    let fills = [fill(d(2010, 7, 30), 30), fill(d(2010, 8, 25), 30)];
    let built = build_exposure("p1", &fills, d(2010, 7, 1), d(2010, 12, 31), &StockpileOptions::default())?;
    let seq = built.sequence;

    let run = seq.to_runs()?;
    let (start, len) = run.runs()[0];
    println!("one run of {len} days: {} to {}", seq.date_at(start)?, seq.date_at(start + len - 1)?);

    let july = DateWindow::new(d(2010, 7, 1), d(2010, 7, 31))?;
    println!("days covered in July: {}", seq.count_ones(&july)?);

    let capped = build_exposure("p1", &fills, d(2010, 7, 1), d(2010, 12, 31), &StockpileOptions { cap: Some(30) })?;
    println!("with a 30-day cap on hand: {} days", capped.sequence.count_ones(&capped.sequence.coverage())?);
    Ok(())
}
