//! Print the fixed header of an RBS file.
//!
//! cargo run --example inspect_header -- Events_Normal.rbs

use rbs_forensics::format::{RbsFileType, RbsVersion};
use rbs_forensics::reader;
use rbs_forensics::writer::{write_fixture, WriterConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bytes = match std::env::args().nth(1) {
        Some(path) => std::fs::read(path)?,
        None => write_fixture(&WriterConfig::new(RbsVersion::V8, RbsFileType::Realtime).with_size(8192), &[])?,
    };
    let h = reader::parse_header(&bytes)?;
    println!("signature      {}", String::from_utf8_lossy(&h.version.signature()));
    println!("builds         {}", h.version.windows_builds());
    println!("file type      {} ({})", h.file_type.name(), h.file_type.file_name(h.version));
    println!("last modified  {}", h.last_modified_iso());
    println!("last chunk     #{} at 0x{:x}, {} bytes", h.last_chunk_index_1, h.last_chunk_offset_1, h.last_chunk_size);
    println!("header length  0x{:x}", h.len());
    println!("nominal size   {} (actual {})", h.nominal_size(), bytes.len());
    for issue in h.issues(bytes.len() as u64) {
        println!("issue          {issue:?}");
    }
    Ok(())
}
