mod common;

use serde_json::{json, Value};

use rbs_forensics::format::{HeaderError, RbsFileType, RbsVersion};
use rbs_forensics::reader::{self, verify_chunk, CrcMatch, ReadOptions, WarningKind};
use rbs_forensics::writer::{corrupt, write_fixture, CorruptionSite, FixtureWriter, WriterConfig};
use rbs_forensics::DataChunk;

const TS: u64 = 132_300_000_000_000_000;

fn five_chunks() -> (Vec<u8>, Vec<u64>) {
    let config = WriterConfig::new(RbsVersion::V8, RbsFileType::NormalCritical).with_size(32 * 1024).with_timestamp(TS);
    let mut writer = FixtureWriter::new(config).unwrap();
    for i in 0..5 {
        let batch: Vec<Value> = (0..3)
            .map(|r| json!({"name": "Census.OS", "time": "2021-03-04T05:06:07Z", "data": {"c": i, "r": r}}))
            .collect();
        writer.append(&batch).unwrap();
    }
    let offsets = writer.placements().iter().map(|p| p.offset).collect();
    (writer.finish(), offsets)
}

fn kinds(out: &reader::ReadOutput) -> Vec<WarningKind> {
    out.report.warnings.iter().map(|w| w.kind).collect()
}

fn chunk_ids(out: &reader::ReadOutput) -> Vec<u32> {
    out.chunks.iter().filter(|c| c.ok).map(|c| c.chunk.chunk_index).collect()
}

#[test]
fn payload_flip_fails_crc_and_spares_neighbours() {
    let (image, _) = five_chunks();
    let bad = corrupt(&image, CorruptionSite::PayloadByteFlip { chunk: 2, byte: 5 }).unwrap();
    let out = reader::read_bytes(&bad, &ReadOptions::default()).unwrap();
    assert!(kinds(&out).contains(&WarningKind::CrcMismatch), "{:?}", out.report.warnings);
    assert_eq!(chunk_ids(&out), [0, 1, 3, 4]);
    assert_eq!(out.report.chunks_failed, 1);
}

#[test]
fn inverted_crc_field_is_reported() {
    let (image, offsets) = five_chunks();
    let bad = corrupt(&image, CorruptionSite::CrcField { chunk: 0 }).unwrap();
    let chunk = DataChunk::from_slice(&bad, offsets[0] as usize).unwrap();
    let check = verify_chunk(&chunk);
    assert!(!check.ok);
    assert_eq!(check.mode, CrcMatch::Neither);
    assert_eq!(chunk.crc32, !common::crc32_oracle(&chunk.deflate_payload));
}

#[test]
fn bad_size_field_resyncs_on_next_chunk() {
    let (image, _) = five_chunks();
    let bad = corrupt(&image, CorruptionSite::SizeField { chunk: 1, deflate_size: 3 }).unwrap();
    let out = reader::read_bytes(&bad, &ReadOptions::default()).unwrap();
    let ids = chunk_ids(&out);
    assert!(!ids.contains(&1), "{ids:?}");
    for want in [0, 2, 3, 4] {
        assert!(ids.contains(&want), "chunk {want} lost: {ids:?}");
    }
    assert!(!out.report.is_clean());
}

#[test]
fn garbage_between_chunks_is_skipped() {
    let (mut image, offsets) = five_chunks();
    // overwrite chunk 3 with noise; chunks 0..=2 and 4 stay intact
    let (start, end) = (offsets[3] as usize, offsets[4] as usize);
    for (i, b) in image[start..end].iter_mut().enumerate() {
        *b = (i as u8).wrapping_mul(151).wrapping_add(7);
    }
    let out = reader::read_bytes(&image, &ReadOptions::default()).unwrap();
    assert_eq!(chunk_ids(&out), [0, 1, 2, 4]);
    assert_eq!(out.records().count(), 12);
}

#[test]
fn damaged_signature_is_fatal() {
    let (image, _) = five_chunks();
    let bad = corrupt(&image, CorruptionSite::SignatureByte).unwrap();
    assert!(matches!(reader::read_bytes(&bad, &ReadOptions::default()), Err(HeaderError::UnknownSignature { .. })));
}

#[test]
fn short_input_is_fatal() {
    for len in [0, 7, 0x34] {
        let image =
            write_fixture(&WriterConfig::new(RbsVersion::V8, RbsFileType::Normal).with_size(4096), &[]).unwrap();
        assert!(reader::read_bytes(&image[..len], &ReadOptions::default()).is_err(), "len {len}");
    }
}

#[test]
fn malformed_json_inside_a_valid_chunk_is_isolated() {
    let config = WriterConfig::new(RbsVersion::V8, RbsFileType::Normal).with_size(8192).with_timestamp(TS);
    let mut writer = FixtureWriter::new(config).unwrap();
    writer
        .append(&[json!({"name": "Census.OS"}), json!([1, 2]), json!("loose text"), json!({"name": "Census.Storage"})])
        .unwrap();
    let out = reader::read_bytes(&writer.finish(), &ReadOptions::default()).unwrap();
    let names: Vec<&str> = out.records().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["Census.OS", "Census.Storage"]);
    let k = kinds(&out);
    assert!(k.contains(&WarningKind::RecordRejected), "{k:?}");
    assert!(k.contains(&WarningKind::NonJsonBytes), "{k:?}");
    assert!(k.contains(&WarningKind::CountMismatch), "{k:?}");
}
