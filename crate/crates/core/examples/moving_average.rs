//! Trailing moving average of an exposure, the kind of series plotted
//! under a combined timeline.

use chrono::NaiveDate;
use tiavseq::RefSequence;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = NaiveDate::from_ymd_opt(2011, 3, 1).unwrap();
    let seq = RefSequence::binary("p1", reference, "1111111000011111111111000000000111")?;
    println!("date,ma7");
    for (date, v) in seq.moving_average(7)? {
        println!("{date},{v:.3}");
    }
    Ok(())
}
