//! Overfill a small ring so it wraps, then read the surviving chunks back in
//! index order.

use serde_json::json;

use rbs_forensics::format::{RbsFileType, RbsVersion};
use rbs_forensics::reader::{self, ReadOptions};
use rbs_forensics::writer::{FixtureWriter, WriterConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut writer = FixtureWriter::new(WriterConfig::new(RbsVersion::V8, RbsFileType::Realtime).with_size(2048))?;
    let capacity = writer.body_capacity();
    let mut written = 0u64;
    let mut i = 0;
    while written < 3 * capacity {
        written += writer.append(&[json!({"name": "Census.OS", "data": {"seq": i}})])?.len;
        i += 1;
    }
    let image = writer.finish();
    let out = reader::read_bytes(&image, &ReadOptions::default())?;
    println!("wrote {i} chunks into a {capacity}-byte body; {} survive", out.chunks.len());
    for c in &out.chunks {
        println!("index {:>3} at 0x{:04x}", c.chunk.chunk_index, c.chunk.file_offset);
    }
    for w in &out.report.warnings {
        println!("{w}");
    }
    Ok(())
}
