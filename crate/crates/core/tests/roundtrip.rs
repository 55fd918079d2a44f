mod common;

use proptest::prelude::*;
use serde_json::{json, Map, Value};

use rbs_forensics::format::{RbsFileType, RbsVersion};
use rbs_forensics::reader::{self, ReadOptions, WarningKind};
use rbs_forensics::writer::{write_fixture, FixtureWriter, WriterConfig};
use rbs_forensics::TelemetryRecord;

const TS: u64 = 132_300_000_000_000_000;

fn leaf() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::from),
        (-1e9f64..1e9).prop_map(|f| json!(f)),
        "\\PC{0,16}".prop_map(Value::String),
    ]
}

fn value() -> impl Strategy<Value = Value> {
    leaf().prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map("[a-zA-Z_]{1,8}", inner, 0..4)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

fn record() -> impl Strategy<Value = Value> {
    (
        "[A-Za-z][A-Za-z0-9.]{0,40}",
        prop::option::of("20[0-9]{2}-0[1-9]-1[0-9]T0[0-9]:[0-5][0-9]:[0-5][0-9]Z"),
        prop::option::of(any::<u32>()),
        prop::collection::btree_map("[A-Za-z]{1,10}", value(), 0..5),
    )
        .prop_map(|(name, time, flags, data)| {
            let mut m = Map::new();
            m.insert("ver".into(), json!("4.0"));
            m.insert("name".into(), json!(name));
            if let Some(t) = time {
                m.insert("time".into(), json!(t));
            }
            if let Some(f) = flags {
                m.insert("flags".into(), json!(f));
            }
            m.insert("data".into(), Value::Object(data.into_iter().collect()));
            Value::Object(m)
        })
}

fn version() -> impl Strategy<Value = RbsVersion> {
    prop::sample::select(RbsVersion::ALL.to_vec())
}

fn file_type() -> impl Strategy<Value = RbsFileType> {
    prop::sample::select(RbsFileType::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn read_inverts_write(
        batches in prop::collection::vec(prop::collection::vec(record(), 1..8), 1..6),
        version in version(),
        ft in file_type(),
        newlines in any::<bool>(),
        blob in 0usize..64,
    ) {
        let mut config = WriterConfig::new(version, ft).with_size(256 * 1024).with_timestamp(TS);
        config.newline_separated = newlines;
        config.base64_blob_size = blob * 4;
        let image = write_fixture(&config, &batches).unwrap();
        prop_assert_eq!(image.len(), 256 * 1024);
        let out = reader::read_bytes(&image, &ReadOptions::source("p.rbs")).unwrap();
        prop_assert!(out.report.is_clean(), "{:?}", out.report.warnings);
        let got: Vec<Value> = out.records().map(TelemetryRecord::to_json).collect();
        let want: Vec<Value> = batches.concat();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn from_json_then_to_json_is_identity(v in record()) {
        let rec = TelemetryRecord::from_json(v.clone()).unwrap();
        prop_assert_eq!(rec.to_json(), v);
    }
}

#[test]
fn randomized_records_survive_every_version_and_type() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for version in RbsVersion::ALL {
        for ft in RbsFileType::ALL {
            let batches: Vec<Vec<Value>> =
                (0..4).map(|_| (0..6).map(|_| common::random_record(&mut rng)).collect()).collect();
            let config = WriterConfig::new(version, ft).with_size(128 * 1024).with_timestamp(TS);
            let image = write_fixture(&config, &batches).unwrap();
            let out = reader::read_bytes(&image, &ReadOptions::default()).unwrap();
            assert_eq!(out.header().version, version);
            assert_eq!(out.header().file_type, ft);
            let got: Vec<Value> = out.records().map(TelemetryRecord::to_json).collect();
            assert_eq!(got, batches.concat(), "{version:?}/{ft:?}");
        }
    }
}

#[test]
fn wrapped_ring_reads_newest_lap_in_index_order() {
    let mut config = WriterConfig::new(RbsVersion::V8, RbsFileType::Realtime).with_size(2048).with_timestamp(TS);
    config.compression_level = 0;
    config.start_chunk_index = 40;
    let mut writer = FixtureWriter::new(config).unwrap();
    for i in 0..60 {
        writer.append(&[json!({"name": "Census.OS", "data": {"i": format!("{i:04}")}})]).unwrap();
    }
    let placements = writer.placements().to_vec();
    assert!(placements.iter().any(|p| p.wrapped));
    let image = writer.finish();
    let out = reader::read_bytes(&image, &ReadOptions::default()).unwrap();
    let order: Vec<u32> = out.chunks.iter().map(|c| c.chunk.chunk_index).collect();
    assert!(order.windows(2).all(|w| w[1] == w[0] + 1), "{order:?}");
    assert_eq!(*order.last().unwrap(), 99);
    for c in &out.chunks {
        let i = c.chunk.chunk_index - 40;
        assert_eq!(c.records[0].data_field("i"), Some(&json!(format!("{i:04}"))));
    }
    let offsets: Vec<u64> = out.chunks.iter().map(|c| c.chunk.file_offset).collect();
    assert!(offsets.windows(2).any(|w| w[1] < w[0]), "no wrap visible in offsets");
}

#[test]
fn empty_ring_has_no_records_and_no_warnings() {
    let config = WriterConfig::new(RbsVersion::V8, RbsFileType::Normal).with_size(4096).with_timestamp(TS);
    let image = write_fixture(&config, &[]).unwrap();
    let out = reader::read_bytes(&image, &ReadOptions::default()).unwrap();
    assert_eq!(out.records().count(), 0);
    assert!(out.report.is_clean(), "{:?}", out.report.warnings);
}

#[test]
fn truncated_image_keeps_complete_chunks() {
    let batches: Vec<Vec<Value>> = (0..5).map(|i| vec![json!({"name": "Census.OS", "data": {"i": i}})]).collect();
    let config = WriterConfig::new(RbsVersion::V8, RbsFileType::Normal).with_size(64 * 1024).with_timestamp(TS);
    let mut writer = FixtureWriter::new(config).unwrap();
    for b in &batches {
        writer.append(b).unwrap();
    }
    let cut = {
        let p = writer.placements()[3];
        (p.offset + p.len / 2) as usize
    };
    let mut image = writer.finish();
    image.truncate(cut);
    let out = reader::read_bytes(&image, &ReadOptions::default()).unwrap();
    assert_eq!(out.records().count(), 3);
    let kinds: Vec<WarningKind> = out.report.warnings.iter().map(|w| w.kind).collect();
    assert!(kinds.contains(&WarningKind::Truncated), "{kinds:?}");
}
