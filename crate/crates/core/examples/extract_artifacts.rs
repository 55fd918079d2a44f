//! Pull disk, application, process and boot-record artifacts out of records.

use base64::Engine;
use serde_json::json;

use rbs_forensics::catalog::{self, ExtractorId};
use rbs_forensics::extract;
use rbs_forensics::format::{RbsFileType, RbsVersion};
use rbs_forensics::reader::{self, ReadOptions};
use rbs_forensics::writer::{write_fixture, WriterConfig};

fn demo() -> Vec<u8> {
    let mut mbr = vec![0u8; 512];
    mbr[510..].copy_from_slice(&[0x55, 0xAA]);
    let records = vec![
        json!({"name": extract::PHYSICAL_DISK_EVENT, "data": {"SerialNumber": "S3YBNB0K100915R", "Size": "1000202273280", "MediaType": "SSD"}}),
        json!({"name": extract::MBR_EVENT, "data": {"DiskId": "0", "MbrData": base64::engine::general_purpose::STANDARD.encode(&mbr)}}),
        json!({"name": extract::APP_REMOVE_EVENT, "time": "2021-05-02T10:00:00Z", "data": {"ProgramId": "0000f519"}}),
        json!({"name": "Win32kTraceLogging.AppInteractivitySummary", "data": {"AppName": "cmd.exe"}}),
    ];
    write_fixture(&WriterConfig::new(RbsVersion::V8, RbsFileType::NormalCritical).with_size(16 * 1024), &[records])
        .unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bytes = match std::env::args().nth(1) {
        Some(path) => std::fs::read(path)?,
        None => demo(),
    };
    let out = reader::read_bytes(&bytes, &ReadOptions::default())?;
    for rec in out.records() {
        let Some(id) = catalog::builtin().lookup(&rec.name).and_then(|e| e.extractor) else {
            continue;
        };
        match id {
            ExtractorId::DiskInventory => {
                let d = extract::extract_disk_inventory(rec)?;
                println!("disk     serial {:?}, {:?} bytes, {:?}", d.serial_number, d.size_bytes, d.media_type);
            }
            ExtractorId::AppLifecycle => {
                let a = extract::extract_app_lifecycle(rec)?;
                println!("app      {:?} {}", a.kind, a.label().unwrap_or("?"));
            }
            ExtractorId::ProcessExecution => {
                let p = extract::extract_process_execution(rec)?;
                println!("process  {} via {:?}", p.identifier, p.identity_source);
            }
            ExtractorId::BootSector => match extract::extract_boot_sector(rec, extract::DEFAULT_BOOT_SECTOR_FIELDS) {
                Ok(b) => println!(
                    "boot     {:?} disk {:?}, {} bytes, signature missing: {}",
                    b.kind,
                    b.disk_id,
                    b.raw_bytes.len(),
                    b.signature_missing
                ),
                Err(e) => println!("boot     {e}"),
            },
        }
    }
    Ok(())
}
