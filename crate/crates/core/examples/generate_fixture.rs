//! Write a synthetic RBS file for testing other tools.
//!
//! cargo run --example generate_fixture -- out.rbs

use serde_json::json;

use rbs_forensics::format::{RbsFileType, RbsVersion};
use rbs_forensics::writer::{FixtureWriter, WriterConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path =
        std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("fixture.rbs").display().to_string());
    let mut config = WriterConfig::new(RbsVersion::V8, RbsFileType::Normal).with_timestamp(132_300_000_000_000_000);
    config.base64_blob_size = 64;
    config.seed = 7;
    let mut writer = FixtureWriter::new(config)?;
    for hour in 0..24 {
        writer.append(&[
            json!({"name": "Census.OS", "time": format!("2020-03-30T{hour:02}:00:00Z")}),
            json!({"name": "Win32kTraceLogging.AppInteractivitySummary", "time": format!("2020-03-30T{hour:02}:30:00Z"), "appId": "W:0000!explorer.exe"}),
        ])?;
    }
    let chunks = writer.placements().len();
    let image = writer.finish();
    std::fs::write(&path, &image)?;
    println!("wrote {path}: {} bytes, {chunks} chunks", image.len());
    Ok(())
}
