//! Writing sequences and blocks to the text store and reading them back.

use chrono::NaiveDate;
use tiavseq::store::{assemble_blocks, compute_stats, read_store, write_store, RecordFilter, SequenceRecord};
use tiavseq::{InfoKind, RefSequence, SequenceBlock};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("tiavseq-store-example");
    let reference = NaiveDate::from_ymd_opt(2007, 1, 1).unwrap();

    let med = RefSequence::binary("p1", reference, "0000000001111111100011111")?;
    let block = SequenceBlock::new(vec![
        RefSequence::new("p1", InfoKind::Comorbidity, reference, ".2..5....................")?,
        RefSequence::new("p1", InfoKind::Comorbidity, reference, "....A....................")?,
    ])?;
    let mut dense = vec![SequenceRecord::dense("M1", &med)];
    dense.extend(SequenceRecord::from_block("charlson", &block));
    let runs = vec![SequenceRecord::runlength("M1", &med.to_runs()?)];

    let dense_path = dir.join("dense.tsv");
    let rl_path = dir.join("runs.tsv");
    let manifest = write_store(&dense, &dense_path)?;
    write_store(&runs, &rl_path)?;
    println!("{} records, checksum {} {}", manifest.records, manifest.checksum_algorithm, manifest.checksum);
    print!("{}", std::fs::read_to_string(&dense_path)?);
    print!("{}", std::fs::read_to_string(&rl_path)?);

    let back = read_store(&dense_path, &RecordFilter::all().label("charlson"))?;
    let blocks = assemble_blocks(&back)?;
    assert_eq!(blocks[&("p1".to_string(), "charlson".to_string())], block);
    let rl = read_store(&rl_path, &RecordFilter::all())?;
    assert_eq!(rl[0].to_sequence()?, med);
    println!("round trip ok");

    let stats = compute_stats(&[], &[dense_path, rl_path])?;
    print!("{}", stats.to_text());
    Ok(())
}
