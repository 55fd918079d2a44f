mod common;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde_json::json;

use rbs_forensics::extract::{self, BlobEncoding, BootRecordKind, ExtractError, IdentitySource, LifecycleKind};
use rbs_forensics::format::{RbsFileType, RbsVersion};
use rbs_forensics::reader::{self, ReadOptions};
use rbs_forensics::writer::{write_fixture, WriterConfig};
use rbs_forensics::TelemetryRecord;

use common::{sample_disk_record, synthetic_mbr};

fn rec(v: serde_json::Value) -> TelemetryRecord {
    TelemetryRecord::from_json(v).unwrap()
}

#[test]
fn disk_inventory_survives_an_image_round_trip() {
    let config = WriterConfig::new(RbsVersion::V8, RbsFileType::NormalCritical).with_size(16 * 1024);
    let image = write_fixture(&config, &[vec![sample_disk_record()]]).unwrap();
    let out = reader::read_bytes(&image, &ReadOptions::default()).unwrap();
    let disk = extract::extract_disk_inventory(out.records().next().unwrap()).unwrap();
    assert_eq!(disk.serial_number.as_deref(), Some("S3YBNB0K100915R"));
    assert_eq!(disk.size_bytes, Some(1_000_202_273_280));
    assert_eq!(disk.media_type.as_deref(), Some("SSD"));
    assert_eq!(disk.device_id.as_deref(), Some(r"\\.\PHYSICALDRIVE0"));
    assert_eq!((disk.index, disk.num_partitions, disk.bytes_per_sector), (Some(0), Some(3), Some(512)));
    assert_eq!(disk.model, None);
    assert!(disk.warnings.is_empty());
}

#[test]
fn disk_inventory_keeps_unparseable_size_raw() {
    let mut v = sample_disk_record();
    v["data"]["Size"] = json!("about 1 TB");
    v["data"]["Index"] = json!(true);
    let disk = extract::extract_disk_inventory(&rec(v)).unwrap();
    assert_eq!(disk.size_bytes, None);
    assert_eq!(disk.size_raw.as_deref(), Some("about 1 TB"));
    assert_eq!(disk.index, None);
    assert_eq!(disk.warnings.len(), 2);
}

#[test]
fn extractors_reject_other_events() {
    let other = rec(json!({"name": "Census.OS"}));
    assert!(matches!(extract::extract_disk_inventory(&other), Err(ExtractError::WrongEventName { .. })));
    assert!(matches!(extract::extract_app_lifecycle(&other), Err(ExtractError::WrongEventName { .. })));
    assert!(matches!(extract::extract_process_execution(&other), Err(ExtractError::WrongEventName { .. })));
    let disk_no_data = rec(json!({"name": extract::PHYSICAL_DISK_EVENT}));
    assert_eq!(extract::extract_disk_inventory(&disk_no_data), Err(ExtractError::NoDataObject));
}

#[test]
fn mbr_blob_decodes_from_base64_and_hex() {
    let mbr = synthetic_mbr(3);
    for (text, enc) in [(STANDARD.encode(&mbr), BlobEncoding::Base64), (hex_upper(&mbr), BlobEncoding::Hex)] {
        let r = rec(json!({"name": extract::MBR_EVENT, "data": {"DiskId": "{d1}", "MbrData": text}}));
        let blob = extract::extract_boot_sector(&r, extract::DEFAULT_BOOT_SECTOR_FIELDS).unwrap();
        assert_eq!(blob.kind, BootRecordKind::Mbr);
        assert_eq!(blob.encoding_detected, enc);
        assert_eq!(blob.raw_bytes, mbr);
        assert_eq!(blob.disk_id.as_deref(), Some("{d1}"));
        assert_eq!(blob.source_field, "MbrData");
        assert!(!blob.signature_missing);
    }
}

fn hex_upper(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02X}")).collect()
}

#[test]
fn boot_blob_candidates_and_signature_check() {
    let mut mbr = synthetic_mbr(9);
    mbr[511] = 0;
    let r = rec(json!({"name": extract::MBR_EVENT, "data": {
        "Short": STANDARD.encode([0u8; 64]),
        "Sector": STANDARD.encode(&mbr),
        "DiskNumber": 2
    }}));
    assert_eq!(extract::extract_boot_sector(&r, &["Missing", "Short"]), Err(ExtractError::NoDecodableField));
    let blob = extract::extract_boot_sector(&r, &["Short", "Sector"]).unwrap();
    assert_eq!(blob.source_field, "Sector");
    assert_eq!(blob.disk_id.as_deref(), Some("2"));
    assert!(blob.signature_missing);
}

#[test]
fn gpt_blob_checks_efi_header() {
    let mut raw = synthetic_mbr(1);
    raw.extend_from_slice(b"EFI PART");
    raw.resize(1024, 0);
    let r = rec(json!({"name": extract::GPT_EVENT, "data": {"GptData": STANDARD.encode(&raw)}}));
    let blob = extract::extract_boot_sector(&r, extract::DEFAULT_BOOT_SECTOR_FIELDS).unwrap();
    assert_eq!(blob.kind, BootRecordKind::Gpt);
    assert!(!blob.signature_missing);

    raw[512] = b'X';
    let r = rec(json!({"name": extract::GPT_EVENT, "data": {"GptData": STANDARD.encode(&raw)}}));
    assert!(extract::extract_boot_sector(&r, &["GptData"]).unwrap().signature_missing);
}

#[test]
fn app_lifecycle_copies_fields_through() {
    let add = rec(json!({"name": extract::APP_ADD_EVENT, "time": "2021-01-01T00:00:00Z",
        "data": {"Name": "Notepad++", "Version": "8.1", "Publisher": "Don Ho", "ProgramId": "0000abc", "Extra": 1}}));
    let ev = extract::extract_app_lifecycle(&add).unwrap();
    assert_eq!(ev.kind, LifecycleKind::Install);
    assert_eq!(ev.label(), Some("Notepad++"));
    assert_eq!((ev.version.as_deref(), ev.publisher.as_deref()), (Some("8.1"), Some("Don Ho")));
    assert_eq!(ev.data["Extra"], json!(1));

    let remove = rec(json!({"name": extract::APP_REMOVE_EVENT, "data": {"ProgramInstanceId": "inst-7"}}));
    let ev = extract::extract_app_lifecycle(&remove).unwrap();
    assert_eq!(ev.kind, LifecycleKind::Remove);
    assert_eq!((ev.name, ev.program_id.as_deref(), ev.time), (None, Some("inst-7"), None));
}

#[test]
fn process_identity_precedence() {
    let name = "Win32kTraceLogging.AppInteractivitySummary";
    let both = rec(json!({"name": name, "appId": "W:00001!a.exe", "data": {"AppName": "b.exe"}}));
    let ev = extract::extract_process_execution(&both).unwrap();
    assert_eq!((ev.identifier.as_str(), &ev.identity_source), ("W:00001!a.exe", &IdentitySource::AppId));

    let data_only = rec(json!({"name": name, "appId": "", "data": {"AppId": "", "ProcessName": "c.exe"}}));
    let ev = extract::extract_process_execution(&data_only).unwrap();
    assert_eq!(ev.identifier, "c.exe");
    assert_eq!(ev.identity_source, IdentitySource::DataField("ProcessName".into()));
    assert!(ev.is_undated());

    let none = rec(json!({"name": name, "time": "2021-01-01T00:00:00Z"}));
    let ev = extract::extract_process_execution(&none).unwrap();
    assert_eq!(ev.identifier, "unknown");
    assert!(!ev.identity_known());

    let custom = extract::extract_process_execution_with(&data_only, &["Nope"]).unwrap();
    assert_eq!(custom.identity_source, IdentitySource::Unknown);
}
