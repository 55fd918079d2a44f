//! Structured facts from catalogued telemetry events.
//!
//! Extractors copy values through from the record and never invent them:
//! a field missing from the JSON is `None` in the output.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::catalog::{self, ExtractorId};
use crate::format::TelemetryRecord;

pub const PHYSICAL_DISK_EVENT: &str = "Microsoft.Windows.Inventory.General.InventoryMiscellaneousPhysicalDiskInfoAdd";
pub const APP_ADD_EVENT: &str = "Microsoft.Windows.Inventory.Core.InventoryApplicationAdd";
pub const APP_REMOVE_EVENT: &str = "Microsoft.Windows.Inventory.Core.InventoryApplicationRemove";
pub const MBR_EVENT: &str = "Microsoft.Windows.Inventory.General.InventoryMiscellaneousMbrDiskAdd";
pub const GPT_EVENT: &str = "Microsoft.Windows.Inventory.General.InventoryMiscellaneousGptDiskAdd";

/// `data` keys tried, in order, for a raw boot record. The real field names
/// are not documented; override per case with
/// [`extract_boot_sector`]'s candidate list.
pub const DEFAULT_BOOT_SECTOR_FIELDS: &[&str] =
    &["MbrData", "GptData", "BootSector", "RawData", "Mbr", "Gpt", "Data", "Raw", "Content"];

/// `data` keys tried for a process identity when `appId` is absent.
pub const DEFAULT_PROCESS_FIELDS: &[&str] =
    &["AppId", "AppName", "ProcessName", "ExecutableName", "ExeName", "Name", "AppSessionId"];

const DISK_ID_FIELDS: &[&str] = &["DeviceId", "DiskId", "DiskNumber", "Index"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("event '{found}' is not handled by the {extractor} extractor")]
    WrongEventName { extractor: &'static str, found: String },
    #[error("record has no data object")]
    NoDataObject,
    #[error("no candidate field decodes to a boot record of at least 512 bytes")]
    NoDecodableField,
}

fn wrong(extractor: &'static str, rec: &TelemetryRecord) -> ExtractError {
    ExtractError::WrongEventName { extractor, found: rec.name.clone() }
}

fn str_field(data: &Map<String, Value>, key: &str) -> Option<String> {
    data.get(key).and_then(Value::as_str).map(str::to_owned)
}

/// Integer that may be stored as a JSON number or a decimal string.
fn int_field(data: &Map<String, Value>, key: &str, warnings: &mut Vec<String>) -> Option<i64> {
    match data.get(key)? {
        Value::Number(n) => n.as_i64(),
        Value::String(s) => match s.trim().parse() {
            Ok(v) => Some(v),
            Err(_) => {
                warnings.push(format!("{key}: '{s}' is not a decimal integer"));
                None
            }
        },
        other => {
            warnings.push(format!("{key}: unexpected value {other}"));
            None
        }
    }
}

/// Physical disk identity as recorded by the disk inventory event.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiskInventory {
    pub device_id: Option<String>,
    pub serial_number: Option<String>,
    pub index: Option<i64>,
    pub size_bytes: Option<u64>,
    /// Raw `Size` text when it did not parse as a decimal integer.
    pub size_raw: Option<String>,
    pub num_partitions: Option<i64>,
    pub bytes_per_sector: Option<i64>,
    pub media_type: Option<String>,
    pub model: Option<String>,
    pub time: Option<String>,
    pub warnings: Vec<String>,
}

pub fn extract_disk_inventory(rec: &TelemetryRecord) -> Result<DiskInventory, ExtractError> {
    if rec.name != PHYSICAL_DISK_EVENT {
        return Err(wrong("disk inventory", rec));
    }
    let data = rec.data.as_ref().ok_or(ExtractError::NoDataObject)?;
    let mut warnings = Vec::new();
    let (size_bytes, size_raw) = match data.get("Size") {
        Some(Value::Number(n)) => (n.as_u64(), None),
        Some(Value::String(s)) => match s.trim().parse::<u64>() {
            Ok(v) => (Some(v), None),
            Err(_) => {
                warnings.push(format!("Size: '{s}' is not a decimal integer"));
                (None, Some(s.clone()))
            }
        },
        Some(other) => {
            warnings.push(format!("Size: unexpected value {other}"));
            (None, Some(other.to_string()))
        }
        None => (None, None),
    };
    Ok(DiskInventory {
        device_id: str_field(data, "DeviceId"),
        serial_number: str_field(data, "SerialNumber"),
        index: int_field(data, "Index", &mut warnings),
        size_bytes,
        size_raw,
        num_partitions: int_field(data, "NumPartitions", &mut warnings),
        bytes_per_sector: int_field(data, "BytesPerSector", &mut warnings),
        media_type: str_field(data, "MediaType"),
        model: str_field(data, "Model"),
        time: rec.time.clone(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LifecycleKind {
    Install,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppLifecycleEvent {
    pub kind: LifecycleKind,
    pub name: Option<String>,
    pub version: Option<String>,
    pub publisher: Option<String>,
    pub program_id: Option<String>,
    pub time: Option<String>,
    /// The complete `data` object.
    pub data: Map<String, Value>,
}

impl AppLifecycleEvent {
    /// Best available label for the application.
    pub fn label(&self) -> Option<&str> {
        self.name.as_deref().or(self.program_id.as_deref())
    }
}

pub(crate) fn lifecycle_kind(name: &str) -> Option<LifecycleKind> {
    match name {
        APP_ADD_EVENT => Some(LifecycleKind::Install),
        APP_REMOVE_EVENT => Some(LifecycleKind::Remove),
        _ => None,
    }
}

/// [`AppLifecycleEvent::label`] without building the event.
pub(crate) fn app_label(rec: &TelemetryRecord) -> Option<&str> {
    let data = rec.data.as_ref()?;
    ["Name", "ProgramId", "ProgramInstanceId"].into_iter().find_map(|k| data.get(k).and_then(Value::as_str))
}

pub fn extract_app_lifecycle(rec: &TelemetryRecord) -> Result<AppLifecycleEvent, ExtractError> {
    let kind = lifecycle_kind(&rec.name).ok_or_else(|| wrong("app lifecycle", rec))?;
    let data = rec.data.clone().unwrap_or_default();
    Ok(AppLifecycleEvent {
        kind,
        name: str_field(&data, "Name"),
        version: str_field(&data, "Version"),
        publisher: str_field(&data, "Publisher"),
        program_id: str_field(&data, "ProgramId").or_else(|| str_field(&data, "ProgramInstanceId")),
        time: rec.time.clone(),
        data,
    })
}

/// Where a process identity was taken from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentitySource {
    AppId,
    DataField(String),
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessExecutionEvent {
    /// `"unknown"` when no identity is present.
    pub identifier: String,
    pub identity_source: IdentitySource,
    pub time: Option<String>,
    pub event_name: String,
}

impl ProcessExecutionEvent {
    pub fn is_undated(&self) -> bool {
        self.time.is_none()
    }

    pub fn identity_known(&self) -> bool {
        self.identity_source != IdentitySource::Unknown
    }
}

fn extractor_of(name: &str) -> Option<ExtractorId> {
    catalog::builtin().lookup(name).and_then(|e| e.extractor)
}

/// Identity precedence: `appId`, then the first non-empty string among
/// `data_fields`, then `"unknown"`.
pub fn extract_process_execution_with(
    rec: &TelemetryRecord,
    data_fields: &[&str],
) -> Result<ProcessExecutionEvent, ExtractError> {
    if extractor_of(&rec.name) != Some(ExtractorId::ProcessExecution) {
        return Err(wrong("process execution", rec));
    }
    let from_data = || {
        let data = rec.data.as_ref()?;
        data_fields.iter().find_map(|&key| {
            let v = data.get(key)?.as_str()?;
            (!v.is_empty()).then(|| (v.to_string(), IdentitySource::DataField(key.to_string())))
        })
    };
    let (identifier, identity_source) = match rec.app_id.as_deref() {
        Some(id) if !id.is_empty() => (id.to_string(), IdentitySource::AppId),
        _ => from_data().unwrap_or_else(|| ("unknown".to_string(), IdentitySource::Unknown)),
    };
    Ok(ProcessExecutionEvent { identifier, identity_source, time: rec.time.clone(), event_name: rec.name.clone() })
}

pub fn extract_process_execution(rec: &TelemetryRecord) -> Result<ProcessExecutionEvent, ExtractError> {
    extract_process_execution_with(rec, DEFAULT_PROCESS_FIELDS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BootRecordKind {
    Mbr,
    Gpt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlobEncoding {
    Base64,
    Hex,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootSectorBlob {
    pub kind: BootRecordKind,
    pub disk_id: Option<String>,
    pub source_field: String,
    #[serde(with = "hex_bytes")]
    pub raw_bytes: Vec<u8>,
    pub encoding_detected: BlobEncoding,
    /// The expected boot signature is absent: 0x55AA at 510 for MBR, and for
    /// GPT "EFI PART" at 512 (or the protective MBR's 0x55AA when shorter).
    pub signature_missing: bool,
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

fn decode_blob(text: &str) -> Option<(Vec<u8>, BlobEncoding)> {
    let compact: String = text.chars().filter(|c| !c.is_ascii_whitespace()).collect();
    if compact.is_empty() {
        return None;
    }
    // An all-hex-digit string is valid Base64 too; read it as hex.
    if compact.len().is_multiple_of(2) && compact.bytes().all(|b| b.is_ascii_hexdigit()) {
        return hex::decode(&compact).ok().map(|b| (b, BlobEncoding::Hex));
    }
    STANDARD.decode(&compact).ok().map(|b| (b, BlobEncoding::Base64))
}

fn boot_signature_missing(kind: BootRecordKind, raw: &[u8]) -> bool {
    let mbr_sig = raw.len() >= 512 && raw[510] == 0x55 && raw[511] == 0xAA;
    match kind {
        BootRecordKind::Mbr => !mbr_sig,
        BootRecordKind::Gpt if raw.len() >= 520 => &raw[512..520] != b"EFI PART",
        BootRecordKind::Gpt => !mbr_sig,
    }
}

/// Finds and decodes a raw boot record in the event's `data` object. Each
/// candidate field is decoded as hex (when it consists of hex digits only) or
/// Base64; the first decode of at least 512 bytes wins.
pub fn extract_boot_sector(rec: &TelemetryRecord, field_candidates: &[&str]) -> Result<BootSectorBlob, ExtractError> {
    let kind = match rec.name.as_str() {
        MBR_EVENT => BootRecordKind::Mbr,
        GPT_EVENT => BootRecordKind::Gpt,
        _ => return Err(wrong("boot sector", rec)),
    };
    let data = rec.data.as_ref().ok_or(ExtractError::NoDecodableField)?;
    let disk_id = DISK_ID_FIELDS.iter().find_map(|&k| match data.get(k)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    });
    for &field in field_candidates {
        let Some(text) = data.get(field).and_then(Value::as_str) else {
            continue;
        };
        let Some((raw_bytes, encoding_detected)) = decode_blob(text) else {
            continue;
        };
        if raw_bytes.len() < 512 {
            continue;
        }
        return Ok(BootSectorBlob {
            kind,
            disk_id,
            source_field: field.to_string(),
            signature_missing: boot_signature_missing(kind, &raw_bytes),
            raw_bytes,
            encoding_detected,
        });
    }
    Err(ExtractError::NoDecodableField)
}
