//! Index dates and the four inclusion criteria for one patient.

use chrono::NaiveDate;
use tiavseq::tiav::{candidate_index_dates, evaluate_eligibility, EligibilityParams};
use tiavseq::RefSequence;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = NaiveDate::from_ymd_opt(2008, 1, 1).unwrap();
    // first-line throughout; augmenting starts briefly on day 100, then
    // properly on day 500
    let mut aug = vec![b'0'; 1100];
    aug[99..110].fill(b'1');
    aug[499..700].fill(b'1');
    let augmenting = RefSequence::new("p1", tiavseq::InfoKind::Exposure, reference, aug)?;
    let firstline = RefSequence::binary("p1", reference, &"1".repeat(1100))?;

    println!("initiations: {:?}", candidate_index_dates(&augmenting)?);

    let params = EligibilityParams { x: 300, y: 25, z: 30, w1: 180, w2: 180, u: 60 };
    let r = evaluate_eligibility(&augmenting, &firstline, &params)?;
    println!("eligible: {}, index date: {:?}", r.eligible, r.index_date);
    if let Some(e) = r.evaluation {
        println!(
            "free days pre {}, max on in {}-day window {}, first-line pre/post {}/{}, overlap {}",
            e.free_days_pre, params.z, e.max_on_in_window, e.firstline_pre, e.firstline_post, e.overlap_post
        );
    }

    // 201 days of co-exposure after the index date is not enough for u = 250
    let strict = EligibilityParams { u: 250, ..params };
    let r = evaluate_eligibility(&augmenting, &firstline, &strict)?;
    println!("with u = 250: eligible {}, criteria {:?}", r.eligible, r.evaluation.map(|e| e.passed));
    Ok(())
}
