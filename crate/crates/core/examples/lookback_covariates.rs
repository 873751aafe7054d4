//! Exposure covariates in 30-day windows before each measurement date.

use chrono::NaiveDate;
use tiavseq::tiav::{lookback_windows, time_varying_covariates, CovariateSummary};
use tiavseq::RefSequence;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
    let reference = d(2012, 1, 1);
    let mut bits = "0".repeat(60);
    bits.push_str(&"1".repeat(120));
    bits.push_str(&"0".repeat(200));
    let m1 = RefSequence::binary("p1", reference, &bits)?;
    let m2 = RefSequence::binary("p1", reference, &"01".repeat(190))?;

    let dates = [d(2012, 3, 1), d(2012, 5, 10), d(2012, 8, 2), d(2012, 12, 1), d(2012, 1, 15)];
    for lb in lookback_windows(&dates, 30, &m1)? {
        match lb.window() {
            Some(w) => println!("{} -> {w}", lb.measurement_date),
            None => println!("{} -> flagged", lb.measurement_date),
        }
    }

    let table = time_varying_covariates(&dates, &[("M1", &m1), ("M2", &m2)], 30, CovariateSummary::Fraction)?;
    table.write_csv(std::io::stdout(), Some(("patient_id", "p1")))?;
    Ok(())
}
