//! Check each chunk's CRC-32, then show what one flipped byte does.

use serde_json::json;

use rbs_forensics::format::{RbsFileType, RbsVersion};
use rbs_forensics::reader::{self, ReadOptions, ReadOutput};
use rbs_forensics::writer::{corrupt, write_fixture, CorruptionSite, WriterConfig};

fn report(label: &str, out: &ReadOutput) {
    println!(
        "{label}: {} ok, {} failed, crc mode {:?}",
        out.report.chunks_ok, out.report.chunks_failed, out.report.crc_mode_observed
    );
    for w in &out.report.warnings {
        println!("  {w}");
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if let Some(path) = std::env::args().nth(1) {
        report(&path, &reader::read_file(&path)?);
        return Ok(());
    }
    let config = WriterConfig::new(RbsVersion::V8, RbsFileType::NormalCritical).with_size(16 * 1024);
    let batches: Vec<_> = (0..4).map(|i| vec![json!({"name": "Census.OS", "data": {"i": i}})]).collect();
    let image = write_fixture(&config, &batches)?;
    report("pristine", &reader::read_bytes(&image, &ReadOptions::default())?);
    let bad = corrupt(&image, CorruptionSite::PayloadByteFlip { chunk: 2, byte: 0 })?;
    report("flipped", &reader::read_bytes(&bad, &ReadOptions::default())?);
    Ok(())
}
