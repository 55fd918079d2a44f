//! Scan a raw image for RBS signatures and carve each hit.
//!
//! cargo run --example carve_image -- disk.img

use std::fs::File;
use std::io::Cursor;

use rbs_forensics::carver;
use rbs_forensics::format::{RbsFileType, RbsVersion};
use rbs_forensics::writer::{write_fixture, WriterConfig};

fn carve<S: std::io::Read + std::io::Seek>(mut src: S) -> std::io::Result<()> {
    for hit in carver::scan(&mut src, carver::DEFAULT_WINDOW)? {
        let carved = carver::extract(&mut src, &hit)?;
        println!(
            "{:>10}  {:?}  {:<14} {:?}  {} bytes (+{} padding)",
            hit.offset,
            hit.version,
            hit.file_type.map_or("unknown", |t| t.name()),
            hit.confidence,
            hit.carved_size,
            carved.padded
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    match std::env::args().nth(1) {
        Some(path) => carve(File::open(path)?)?,
        None => {
            let mut image = vec![0u8; 100_000];
            let size = RbsVersion::V8.nominal_size(RbsFileType::Realtime);
            let plant = write_fixture(&WriterConfig::new(RbsVersion::V8, RbsFileType::Realtime).with_size(size), &[])?;
            image.extend_from_slice(&plant);
            image.extend_from_slice(&write_fixture(
                &WriterConfig::new(RbsVersion::V3, RbsFileType::Normal).with_size(4096),
                &[],
            )?);
            carve(Cursor::new(image))?;
        }
    }
    Ok(())
}
