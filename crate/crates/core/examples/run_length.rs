//! Dense and run-length forms of the same exposure.

use chrono::NaiveDate;
use tiavseq::{RefSequence, RunSequence};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = NaiveDate::from_ymd_opt(2007, 1, 1).unwrap();
    let dense = RefSequence::binary("p1", reference, "0000000001111111100011111")?;
    let runs = dense.to_runs()?;
    println!("{}", dense.as_str());
    println!("runs (start, length): {:?}", runs.runs());

    let back = RefSequence::from_runs(&runs);
    assert_eq!(back, dense);
    println!("round trip ok, {} days on", runs.ones());

    // run lists are validated: overlapping runs are rejected
    let bad = RunSequence::new("p1", reference, 25, vec![(10, 8), (15, 2)]);
    println!("overlapping runs: {}", bad.unwrap_err());
    Ok(())
}
