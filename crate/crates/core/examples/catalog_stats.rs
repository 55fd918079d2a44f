//! Per-event-name counts and time ranges, flagging uncatalogued names and
//! names seen in an unexpected file type.

use serde_json::json;

use rbs_forensics::catalog;
use rbs_forensics::format::{RbsFileType, RbsVersion};
use rbs_forensics::reader::{self, ReadOptions};
use rbs_forensics::writer::{write_fixture, WriterConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let paths: Vec<String> = std::env::args().skip(1).collect();
    let mut records = Vec::new();
    if paths.is_empty() {
        let batch = vec![
            json!({"name": "Census.OS", "time": "2021-05-01T08:00:00Z"}),
            json!({"name": "Census.OS", "time": "2021-05-03T08:00:00Z"}),
            json!({"name": "Vendor.Custom.Heartbeat"}),
        ];
        let image = write_fixture(&WriterConfig::new(RbsVersion::V8, RbsFileType::Realtime).with_size(8192), &[batch])?;
        records.extend(reader::read_bytes(&image, &ReadOptions::default())?.into_parts().0);
    }
    for p in &paths {
        records.extend(reader::read_file(p)?.into_parts().0);
    }
    println!("{} catalogued event names", catalog::builtin().len());
    for (name, s) in catalog::corpus_stats(catalog::builtin(), &records) {
        let range = match (s.first_seen, s.last_seen) {
            (Some(a), Some(b)) => format!("{a} .. {b}"),
            _ => "undated".into(),
        };
        let mark = if !s.catalogued {
            " [uncatalogued]"
        } else if s.source_mismatch {
            " [unexpected source]"
        } else {
            ""
        };
        println!("{:>6}  {name}  {range}{mark}", s.count);
    }
    Ok(())
}
