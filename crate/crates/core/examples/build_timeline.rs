//! Merge several RBS files into one timeline and write it as CSV.
//!
//! cargo run --example build_timeline -- Events_Normal.rbs Events_Realtime.rbs

use std::io;

use serde_json::json;

use rbs_forensics::format::{RbsFileType, RbsVersion};
use rbs_forensics::reader::{self, ReadOptions};
use rbs_forensics::timeline::{self, ExportFormat, Filter};
use rbs_forensics::writer::{write_fixture, WriterConfig};

fn demo(ft: RbsFileType, records: Vec<serde_json::Value>) -> Vec<u8> {
    write_fixture(&WriterConfig::new(RbsVersion::V8, ft).with_size(16 * 1024), &[records]).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let paths: Vec<String> = std::env::args().skip(1).collect();
    let inputs: Vec<(String, Vec<u8>)> = if paths.is_empty() {
        vec![
            (
                "normal.rbs".into(),
                demo(
                    RbsFileType::Normal,
                    vec![
                        json!({"name": "Win32kTraceLogging.AppInteractivitySummary", "time": "2021-05-01T08:10:00Z", "appId": "W:0000!notepad.exe"}),
                        json!({"name": "Census.OS"}),
                    ],
                ),
            ),
            (
                "critical.rbs".into(),
                demo(
                    RbsFileType::NormalCritical,
                    vec![
                        json!({"name": "Microsoft.Windows.Inventory.Core.InventoryApplicationAdd", "time": "2021-05-01T08:00:00Z", "data": {"Name": "7-Zip"}}),
                    ],
                ),
            ),
        ]
    } else {
        paths.into_iter().map(|p| std::fs::read(&p).map(|b| (p, b))).collect::<Result<_, _>>()?
    };
    let mut sources: Vec<Vec<_>> = Vec::new();
    for (name, bytes) in &inputs {
        let (records, report) = reader::read_bytes(bytes, &ReadOptions::source(name.as_str()))?.into_parts();
        for w in &report.warnings {
            eprintln!("{name}: {w}");
        }
        sources.push(records.into_iter().map(timeline::normalize_owned).collect());
    }
    let merged = timeline::merge_sort(sources);
    timeline::export(&merged, ExportFormat::Csv, &Filter::default(), io::stdout().lock())?;
    Ok(())
}
