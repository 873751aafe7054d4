//! Time and state functions on a referenced sequence.

use chrono::NaiveDate;
use tiavseq::{DateWindow, InfoKind, RefSequence};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = NaiveDate::from_ymd_opt(2010, 1, 1).unwrap();
    let med = RefSequence::binary("p1", reference, "0001111100111")?;

    // position k <-> calendar date
    let t = med.date_at(4)?;
    println!("position 4 is {t}, and {t} is position {}", med.position_of(t)?);

    // symbol -> clinical state
    for k in [1, 4] {
        let date = med.date_at(k)?;
        println!("{date}: {:?}", med.state_at(date)?);
    }

    let w = DateWindow::new(NaiveDate::from_ymd_opt(2010, 1, 3).unwrap(), med.end_date())?;
    println!("days on medication in {w}: {}", med.count_ones(&w)?);

    let dx = RefSequence::new("p1", InfoKind::Comorbidity, reference, "..5....2.....")?;
    println!("{}: {:?}", dx.date_at(3)?, dx.state_at(dx.date_at(3)?)?);

    match med.date_at(99) {
        Ok(_) => unreachable!(),
        Err(e) => println!("out of range: {e}"),
    }
    Ok(())
}
