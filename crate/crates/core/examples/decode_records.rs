//! Decode every record in an RBS file and print it with its provenance.

use serde_json::json;

use rbs_forensics::format::{RbsFileType, RbsVersion};
use rbs_forensics::reader::{self, ReadOptions};
use rbs_forensics::writer::{write_fixture, WriterConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (bytes, source) = match std::env::args().nth(1) {
        Some(path) => (std::fs::read(&path)?, path),
        None => {
            let config = WriterConfig::new(RbsVersion::V8, RbsFileType::Normal).with_size(16 * 1024);
            let batches = vec![
                vec![json!({"name": "Census.OS", "time": "2021-05-01T08:00:00Z", "data": {"OSVersion": "10.0.19041"}})],
                vec![json!({"name": "Census.Storage", "time": "2021-05-01T08:00:05Z"}), json!({"name": "Census.App"})],
            ];
            (write_fixture(&config, &batches)?, "demo.rbs".to_string())
        }
    };
    let out = reader::read_bytes(&bytes, &ReadOptions::source(source))?;
    for rec in out.records() {
        let p = &rec.provenance;
        println!(
            "chunk {:>4} rec {:>3}  {:<32} {}",
            p.chunk_index,
            p.record_index,
            rec.time.as_deref().unwrap_or("-"),
            rec.name
        );
    }
    println!("{} records, {} warnings", out.report.records, out.report.warnings.len());
    Ok(())
}
