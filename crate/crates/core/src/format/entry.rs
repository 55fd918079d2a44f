use std::cmp::Ordering;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::{format_utc, parse_record_time, PropertyCategory, Provenance, RecordError, TelemetryRecord};

/// Anomalies noted while normalizing a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryFlag {
    MissingTime,
    UnparseableTime,
    /// The record sits in a file type other than the catalog expects.
    UnexpectedSource,
    /// A process-execution record without any usable identity.
    UnknownIdentity,
    /// An extractor rejected the record content.
    ExtractionFailed,
}

/// A normalized, sortable timeline event.
///
/// Serialized key order is fixed: `timestamp`, `name`, `category`,
/// `summary`, `source_file`, `file_type`, `chunk_index`, `chunk_offset`,
/// `record_index`, `flags`, `detail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEntry")]
pub struct TimelineEntry {
    #[serde(rename = "timestamp", serialize_with = "ser_ts")]
    pub timestamp: Option<DateTime<Utc>>,
    #[serde(rename = "name")]
    pub event_name: String,
    pub category: PropertyCategory,
    pub summary: String,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub flags: Vec<EntryFlag>,
    /// The source record, serialized as its original JSON object
    /// (including the raw `time` string).
    pub detail: TelemetryRecord,
}

#[derive(Deserialize)]
struct RawEntry {
    #[serde(deserialize_with = "de_ts")]
    timestamp: Option<DateTime<Utc>>,
    name: String,
    category: PropertyCategory,
    summary: String,
    #[serde(flatten)]
    provenance: Provenance,
    flags: Vec<EntryFlag>,
    detail: Value,
}

impl TryFrom<RawEntry> for TimelineEntry {
    type Error = RecordError;

    fn try_from(raw: RawEntry) -> Result<Self, RecordError> {
        let mut detail = TelemetryRecord::from_json(raw.detail)?;
        detail.provenance = raw.provenance.clone();
        Ok(TimelineEntry {
            timestamp: raw.timestamp,
            event_name: raw.name,
            category: raw.category,
            summary: raw.summary,
            provenance: raw.provenance,
            flags: raw.flags,
            detail,
        })
    }
}

fn ser_ts<S: Serializer>(ts: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
    match ts {
        Some(t) => s.serialize_str(&format_utc(t)),
        None => s.serialize_none(),
    }
}

fn de_ts<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
    let raw: Option<String> = Option::deserialize(d)?;
    match raw {
        None => Ok(None),
        Some(s) => {
            parse_record_time(&s).map(Some).ok_or_else(|| serde::de::Error::custom(format!("bad timestamp '{s}'")))
        }
    }
}

impl TimelineEntry {
    /// ISO-8601 UTC timestamp, `None` for undated entries.
    pub fn timestamp_utc(&self) -> Option<String> {
        self.timestamp.as_ref().map(format_utc)
    }

    /// Total order: timestamp (undated last), then source file, chunk index
    /// and record index.
    pub fn timeline_cmp(&self, other: &Self) -> Ordering {
        let ts = match (&self.timestamp, &other.timestamp) {
            (Some(a), Some(b)) => a.cmp(b),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        ts.then_with(|| self.provenance.source_file.cmp(&other.provenance.source_file))
            .then_with(|| self.provenance.chunk_index.cmp(&other.provenance.chunk_index))
            .then_with(|| self.provenance.record_index.cmp(&other.provenance.record_index))
    }

    pub fn has_flag(&self, flag: EntryFlag) -> bool {
        self.flags.contains(&flag)
    }
}
