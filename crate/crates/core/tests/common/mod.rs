#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Number, Value};

pub const PHYSICAL_DISK_EVENT: &str = "Microsoft.Windows.Inventory.General.InventoryMiscellaneousPhysicalDiskInfoAdd";

/// Bitwise reflected CRC-32 (poly 0xEDB88320), written out longhand.
pub fn crc32_oracle(bytes: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            let mask = (crc & 1).wrapping_neg();
            crc = (crc >> 1) ^ (0xEDB8_8320 & mask);
        }
    }
    !crc
}

pub fn is_leap(y: i64) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

/// Civil date and time for a FILETIME, by counting whole years and months
/// forward from 1601-01-01.
pub fn civil_from_filetime(ticks: u64) -> (i64, u32, u32, u32, u32, u32, u64) {
    let frac = ticks % 10_000_000;
    let secs = ticks / 10_000_000;
    let mut days = (secs / 86_400) as i64;
    let rem = secs % 86_400;
    let mut year = 1601i64;
    loop {
        let len = if is_leap(year) { 366 } else { 365 };
        if days < len {
            break;
        }
        days -= len;
        year += 1;
    }
    let months = [31, if is_leap(year) { 29 } else { 28 }, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
    let mut month = 0;
    while days >= months[month] {
        days -= months[month];
        month += 1;
    }
    (year, month as u32 + 1, days as u32 + 1, (rem / 3600) as u32, (rem / 60 % 60) as u32, (rem % 60) as u32, frac)
}

const NAMES: &[&str] = &[
    "Census.OS",
    "Census.Storage",
    "Microsoft.Windows.Inventory.Core.InventoryApplicationAdd",
    "Win32kTraceLogging.AppInteractivitySummary",
    "Some.Unlisted.Provider.Event",
];

fn random_string(rng: &mut ChaCha8Rng) -> String {
    let pieces =
        ["a", "Z", "0", " ", "\"", "\\", "/", "{", "}", "[", "]", "\n", "\t", "é", "漢", "😀", "\u{1}", ":", ","];
    let n = rng.gen_range(0..12);
    (0..n).map(|_| *pieces.choose(rng).unwrap()).collect()
}

fn random_value(rng: &mut ChaCha8Rng, depth: u32) -> Value {
    let top = if depth >= 3 { 5 } else { 7 };
    match rng.gen_range(0..top) {
        0 => Value::Null,
        1 => Value::Bool(rng.gen()),
        2 => Value::from(rng.gen::<i64>()),
        3 => Number::from_f64(rng.gen_range(-1e6..1e6)).map_or(Value::Null, Value::Number),
        4 => Value::String(random_string(rng)),
        5 => Value::Array((0..rng.gen_range(0..4)).map(|_| random_value(rng, depth + 1)).collect()),
        _ => Value::Object(random_object(rng, depth + 1)),
    }
}

fn random_object(rng: &mut ChaCha8Rng, depth: u32) -> Map<String, Value> {
    let mut m = Map::new();
    for i in 0..rng.gen_range(0..5) {
        m.insert(format!("k{i}{}", random_string(rng)), random_value(rng, depth));
    }
    m
}

/// A telemetry-shaped JSON object with randomized content.
pub fn random_record(rng: &mut ChaCha8Rng) -> Value {
    let mut m = Map::new();
    m.insert("ver".into(), json!("4.0"));
    m.insert("name".into(), json!(NAMES.choose(rng).unwrap()));
    if rng.gen_bool(0.8) {
        let t = format!(
            "20{:02}-{:02}-{:02}T{:02}:{:02}:{:02}.{:07}Z",
            rng.gen_range(15..25),
            rng.gen_range(1..13),
            rng.gen_range(1..29),
            rng.gen_range(0..24),
            rng.gen_range(0..60),
            rng.gen_range(0..60),
            rng.gen_range(0..10_000_000)
        );
        m.insert("time".into(), json!(t));
    }
    if rng.gen_bool(0.5) {
        m.insert("flags".into(), json!(rng.gen_range(0..1 << 20)));
    }
    if rng.gen_bool(0.3) {
        m.insert("epoch".into(), json!(rng.gen::<u32>().to_string()));
    }
    if rng.gen_bool(0.3) {
        m.insert("appId".into(), json!(random_string(rng)));
    }
    if rng.gen_bool(0.2) {
        // keys of unexpected type land in extra_keys and must survive too
        m.insert("os".into(), json!(rng.gen::<u8>()));
    }
    m.insert("ext".into(), Value::Object(random_object(rng, 1)));
    m.insert("data".into(), Value::Object(random_object(rng, 0)));
    Value::Object(m)
}

/// A physical-disk inventory record as it appears on real systems.
pub fn sample_disk_record() -> Value {
    json!({
        "ver": "4.0",
        "name": PHYSICAL_DISK_EVENT,
        "time": "2020-06-01T09:30:00.0000000Z",
        "data": {
            "DeviceId": "\\\\.\\PHYSICALDRIVE0",
            "SerialNumber": "S3YBNB0K100915R",
            "Index": 0,
            "Size": "1000202273280",
            "NumPartitions": 3,
            "BytesPerSector": 512,
            "MediaType": "SSD"
        }
    })
}

/// A 512-byte MBR: boot code filler, one partition entry, 0x55AA signature.
pub fn synthetic_mbr(seed: u8) -> Vec<u8> {
    let mut s: Vec<u8> = (0..446u32).map(|i| (i as u8).wrapping_mul(37).wrapping_add(seed)).collect();
    let entry = [0x80, 0x20, 0x21, 0x00, 0x07, 0xFE, 0xFF, 0xFF, 0x00, 0x08, 0x00, 0x00, 0x00, 0x20, 0x03, 0x00];
    s.extend_from_slice(&entry);
    s.resize(510, 0);
    s.extend_from_slice(&[0x55, 0xAA]);
    s
}
