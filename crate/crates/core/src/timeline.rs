//! Normalization of telemetry records into one ordered forensic timeline.
//!
//! JSONL export is lossless: every [`TimelineEntry`] field is written, in
//! the key order documented on the type, and [`parse_jsonl`] reads it back.
//! CSV export drops `detail`, `file_type`, `chunk_offset` and `flags`.
//! Its header is
//! `timestamp,name,category,summary,source_file,chunk_index,record_index`,
//! quoted per RFC 4180 with CRLF line ends.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::catalog::{self, EventCatalog, EventCatalogEntry, ExtractorId};
use crate::extract;
use crate::format::{format_utc, parse_record_time, EntryFlag, PropertyCategory, TelemetryRecord, TimelineEntry};

pub const CSV_HEADER: [&str; 7] =
    ["timestamp", "name", "category", "summary", "source_file", "chunk_index", "record_index"];

#[derive(Debug, Error)]
pub enum TimelineError {
    #[error("unsupported export format '{0}' (expected jsonl or csv)")]
    UnsupportedFormat(String),
    #[error("invalid name glob: {0}")]
    BadGlob(#[from] glob::PatternError),
    #[error("line {line}: {source}")]
    BadJsonl { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn summarize(entry: Option<&EventCatalogEntry>, rec: &TelemetryRecord, flags: &mut Vec<EntryFlag>) -> String {
    let Some(extractor) = entry.and_then(|e| e.extractor) else {
        return rec.name.clone();
    };
    match extractor {
        ExtractorId::AppLifecycle => match extract::lifecycle_kind(&rec.name) {
            Some(kind) => {
                let verb = match kind {
                    extract::LifecycleKind::Install => "Install",
                    extract::LifecycleKind::Remove => "Remove",
                };
                format!("{verb}: {}", extract::app_label(rec).unwrap_or("<unnamed>"))
            }
            None => {
                flags.push(EntryFlag::ExtractionFailed);
                rec.name.clone()
            }
        },
        ExtractorId::DiskInventory => match extract::extract_disk_inventory(rec) {
            Ok(disk) => format!("Disk SN {} seen", disk.serial_number.as_deref().unwrap_or("<none>")),
            Err(_) => {
                flags.push(EntryFlag::ExtractionFailed);
                rec.name.clone()
            }
        },
        ExtractorId::ProcessExecution => match extract::extract_process_execution(rec) {
            Ok(p) => {
                if !p.identity_known() {
                    flags.push(EntryFlag::UnknownIdentity);
                }
                format!("Process: {}", p.identifier)
            }
            Err(_) => {
                flags.push(EntryFlag::ExtractionFailed);
                rec.name.clone()
            }
        },
        ExtractorId::BootSector => match extract::extract_boot_sector(rec, extract::DEFAULT_BOOT_SECTOR_FIELDS) {
            Ok(blob) => {
                let kind = match blob.kind {
                    extract::BootRecordKind::Mbr => "MBR",
                    extract::BootRecordKind::Gpt => "GPT",
                };
                match blob.disk_id {
                    Some(id) => format!("{kind} of disk {id} recorded ({} bytes)", blob.raw_bytes.len()),
                    None => format!("{kind} recorded ({} bytes)", blob.raw_bytes.len()),
                }
            }
            Err(_) => rec.name.clone(),
        },
    }
}

/// Normalizes one record against `catalog`, consuming it.
pub fn normalize_owned_with(catalog: &EventCatalog, rec: TelemetryRecord) -> TimelineEntry {
    let mut flags = Vec::new();
    let timestamp = match rec.time.as_deref() {
        None => {
            flags.push(EntryFlag::MissingTime);
            None
        }
        Some(t) => {
            let parsed = parse_record_time(t);
            if parsed.is_none() {
                flags.push(EntryFlag::UnparseableTime);
            }
            parsed
        }
    };
    let entry = catalog.lookup(&rec.name);
    if entry.is_some_and(|e| e.expected_source != rec.provenance.file_type) {
        flags.push(EntryFlag::UnexpectedSource);
    }
    let category = entry.map_or(PropertyCategory::Unclassified, |e| e.category);
    let summary = summarize(entry, &rec, &mut flags);
    flags.sort();
    flags.dedup();
    let event_name = rec.name.clone();
    let provenance = rec.provenance.clone();
    TimelineEntry { timestamp, event_name, category, summary, provenance, flags, detail: rec }
}

/// Normalizes one record against `catalog`.
pub fn normalize_with(catalog: &EventCatalog, rec: &TelemetryRecord) -> TimelineEntry {
    normalize_owned_with(catalog, rec.clone())
}

/// Normalizes one record against the built-in catalog.
pub fn normalize(rec: &TelemetryRecord) -> TimelineEntry {
    normalize_with(catalog::builtin(), rec)
}

/// [`normalize`] for an owned record; avoids copying the record into
/// `detail`.
pub fn normalize_owned(rec: TelemetryRecord) -> TimelineEntry {
    normalize_owned_with(catalog::builtin(), rec)
}

/// Concatenates entries from any number of sources and sorts them by
/// timestamp (undated last), source file, chunk index and record index.
/// The sort is stable, so fully tied entries keep their input order.
pub fn merge_sort<I, S>(sources: I) -> Vec<TimelineEntry>
where
    I: IntoIterator<Item = S>,
    S: IntoIterator<Item = TimelineEntry>,
{
    let mut all: Vec<TimelineEntry> = sources.into_iter().flatten().collect();
    // undated entries sort after every representable instant
    let key = |e: &TimelineEntry| {
        e.timestamp.map_or(i128::MAX, |t| t.timestamp() as i128 * 1_000_000_000 + t.timestamp_subsec_nanos() as i128)
    };
    let mut keys: Vec<(i128, usize)> = all.iter().enumerate().map(|(i, e)| (key(e), i)).collect();
    keys.sort_unstable_by(|a, b| a.0.cmp(&b.0).then_with(|| all[a.1].timeline_cmp(&all[b.1])).then(a.1.cmp(&b.1)));
    let mut order: Vec<usize> = keys.into_iter().map(|k| k.1).collect();
    // apply the permutation in place: position i receives entry order[i]
    for i in 0..all.len() {
        let mut src = order[i];
        while src < i {
            src = order[src];
        }
        order[i] = src;
        all.swap(i, src);
    }
    all
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Jsonl,
    Csv,
}

impl FromStr for ExportFormat {
    type Err = TimelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" => Ok(ExportFormat::Jsonl),
            "csv" => Ok(ExportFormat::Csv),
            _ => Err(TimelineError::UnsupportedFormat(s.to_string())),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExportFormat::Jsonl => "jsonl",
            ExportFormat::Csv => "csv",
        })
    }
}

/// Conjunctive entry filter. An entry without a timestamp never passes a
/// time bound. `from` is inclusive, `to` exclusive.
#[derive(Debug, Clone, Default)]
pub struct Filter {
    pub name: Option<glob::Pattern>,
    pub category: Option<PropertyCategory>,
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

impl Filter {
    pub fn with_name(mut self, pattern: &str) -> Result<Self, TimelineError> {
        self.name = Some(glob::Pattern::new(pattern)?);
        Ok(self)
    }

    pub fn with_category(mut self, category: PropertyCategory) -> Self {
        self.category = Some(category);
        self
    }

    pub fn with_range(mut self, from: Option<DateTime<Utc>>, to: Option<DateTime<Utc>>) -> Self {
        self.from = from;
        self.to = to;
        self
    }

    pub fn matches(&self, entry: &TimelineEntry) -> bool {
        if let Some(p) = &self.name {
            if !p.matches(&entry.event_name) {
                return false;
            }
        }
        if self.category.is_some_and(|c| c != entry.category) {
            return false;
        }
        if self.from.is_some() || self.to.is_some() {
            let Some(ts) = entry.timestamp else { return false };
            if self.from.is_some_and(|f| ts < f) || self.to.is_some_and(|t| ts >= t) {
                return false;
            }
        }
        true
    }
}

/// Writes the entries passing `filter`, in their given order.
pub fn export<'a, W: Write>(
    entries: impl IntoIterator<Item = &'a TimelineEntry>,
    format: ExportFormat,
    filter: &Filter,
    out: W,
) -> Result<(), TimelineError> {
    let selected = entries.into_iter().filter(|e| filter.matches(e));
    match format {
        ExportFormat::Jsonl => {
            let mut out = io::BufWriter::new(out);
            for e in selected {
                serde_json::to_writer(&mut out, e).map_err(io::Error::from)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
        ExportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
            w.write_record(CSV_HEADER)?;
            for e in selected {
                let ts = e.timestamp.as_ref().map(format_utc).unwrap_or_default();
                w.write_record([
                    ts.as_str(),
                    &e.event_name,
                    e.category.as_str(),
                    &e.summary,
                    &e.provenance.source_file,
                    &e.provenance.chunk_index.to_string(),
                    &e.provenance.record_index.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn export_to_vec<'a>(
    entries: impl IntoIterator<Item = &'a TimelineEntry>,
    format: ExportFormat,
    filter: &Filter,
) -> Result<Vec<u8>, TimelineError> {
    let mut buf = Vec::new();
    export(entries, format, filter, &mut buf)?;
    Ok(buf)
}

/// Reads JSONL written by [`export`]. Blank lines are skipped.
pub fn parse_jsonl(text: &str) -> Result<Vec<TimelineEntry>, TimelineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| TimelineError::BadJsonl { line: i + 1, source }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{Provenance, RbsFileType};
    use serde_json::json;

    fn rec(value: serde_json::Value, source: &str, ft: RbsFileType, chunk: u32, idx: u32) -> TelemetryRecord {
        let mut r = TelemetryRecord::from_json(value).unwrap();
        r.provenance = Provenance {
            source_file: source.into(),
            file_type: ft,
            chunk_index: chunk,
            record_index: idx,
            ..Default::default()
        };
        r
    }

    #[test]
    fn summaries() {
        let add = rec(
            json!({"name": extract::APP_ADD_EVENT, "time": "2019-01-02T03:04:05Z", "data": {"Name": "Git"}}),
            "a",
            RbsFileType::NormalCritical,
            0,
            0,
        );
        let e = normalize(&add);
        assert_eq!(e.summary, "Install: Git");
        assert_eq!(e.category, PropertyCategory::OsAppLifecycle);
        assert!(e.flags.is_empty());
        assert_eq!(e.detail.time.as_deref(), Some("2019-01-02T03:04:05Z"));

        let storage =
            rec(json!({"name": "Census.Storage", "time": "2019-01-01T00:00:00Z"}), "a", RbsFileType::Realtime, 0, 0);
        let e = normalize(&storage);
        assert_eq!((e.summary.as_str(), e.category), ("Census.Storage", PropertyCategory::OsAppLifecycle));

        let proc_ =
            rec(json!({"name": "Win32kTraceLogging.PostUpdateUseInfo"}), "a", RbsFileType::NormalCritical, 0, 0);
        let e = normalize(&proc_);
        assert_eq!(e.summary, "Process: unknown");
        assert_eq!(e.flags, vec![EntryFlag::MissingTime, EntryFlag::UnknownIdentity]);
    }

    #[test]
    fn bad_time_and_source() {
        let r = rec(json!({"name": "Census.OS", "time": "not-a-date"}), "a", RbsFileType::Normal, 0, 0);
        let e = normalize(&r);
        assert_eq!(e.timestamp, None);
        assert_eq!(e.flags, vec![EntryFlag::UnparseableTime, EntryFlag::UnexpectedSource]);
        assert_eq!(e.detail.time.as_deref(), Some("not-a-date"));
    }

    #[test]
    fn merge_interleaves_and_ties() {
        let a: Vec<_> = ["2019-01-01T00:00:01Z", "2019-01-01T00:00:03Z"]
            .iter()
            .enumerate()
            .map(|(i, t)| normalize(&rec(json!({"name": "X", "time": t}), "a.rbs", RbsFileType::Normal, 0, i as u32)))
            .collect();
        let b: Vec<_> = ["2019-01-01T00:00:02Z", "2019-01-01T00:00:03Z"]
            .iter()
            .enumerate()
            .map(|(i, t)| normalize(&rec(json!({"name": "X", "time": t}), "b.rbs", RbsFileType::Normal, 0, i as u32)))
            .collect();
        let undated = normalize(&rec(json!({"name": "X"}), "0.rbs", RbsFileType::Normal, 0, 0));
        let merged = merge_sort([b, vec![undated], a]);
        let order: Vec<_> = merged
            .iter()
            .map(|e| (e.provenance.source_file.as_str(), e.timestamp.map(|t| t.format("%S").to_string())))
            .collect();
        let s = |x: &str| Some(x.to_string());
        assert_eq!(
            order,
            [("a.rbs", s("01")), ("b.rbs", s("02")), ("a.rbs", s("03")), ("b.rbs", s("03")), ("0.rbs", None)]
        );
        assert!(merge_sort(Vec::<Vec<TimelineEntry>>::new()).is_empty());
    }

    fn mixed() -> Vec<TimelineEntry> {
        let names = [
            ("Census.OS", "2019-01-01T00:00:00Z"),
            ("Win32kTraceLogging.AppInteractivitySummary", "2019-01-02T00:00:00Z"),
            ("Microsoft.Windows.HangReporting.AppHangEvent", "2019-01-03T00:00:00Z"),
            ("Some.Other, \"quoted\"", "2019-01-04T00:00:00Z"),
        ];
        names
            .iter()
            .enumerate()
            .map(|(i, (n, t))| {
                normalize(&rec(json!({"name": n, "time": t}), "x.rbs", RbsFileType::Normal, 1, i as u32))
            })
            .collect()
    }

    #[test]
    fn csv_export() {
        let entries = mixed();
        let out =
            String::from_utf8(export_to_vec(&entries[..3], ExportFormat::Csv, &Filter::default()).unwrap()).unwrap();
        assert_eq!(out.split("\r\n").filter(|l| !l.is_empty()).count(), 4);
        assert!(out.starts_with("timestamp,name,category,summary,source_file,chunk_index,record_index\r\n"));
        let quoted =
            String::from_utf8(export_to_vec(&entries[3..], ExportFormat::Csv, &Filter::default()).unwrap()).unwrap();
        assert!(quoted.contains(r#""Some.Other, ""quoted""""#), "{quoted}");

        let none = Filter::default().with_range(parse_record_time("2030-01-01T00:00:00Z"), None);
        let out = export_to_vec(&entries, ExportFormat::Csv, &none).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{}\r\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn filters() {
        let entries = mixed();
        let by_cat = Filter::default().with_category(PropertyCategory::ProcessExecution);
        let kept: Vec<_> = entries.iter().filter(|e| by_cat.matches(e)).map(|e| e.provenance.record_index).collect();
        assert_eq!(kept, [1, 2]);
        let glob = Filter::default().with_name("Win32k*").unwrap();
        assert_eq!(entries.iter().filter(|e| glob.matches(e)).count(), 1);
        let range = Filter::default()
            .with_range(parse_record_time("2019-01-02T00:00:00Z"), parse_record_time("2019-01-04T00:00:00Z"));
        assert_eq!(entries.iter().filter(|e| range.matches(e)).count(), 2);
        assert!(Filter::default().with_name("[").is_err());
    }

    #[test]
    fn jsonl_is_lossless() {
        let entries = mixed();
        let out = export_to_vec(&entries, ExportFormat::Jsonl, &Filter::default()).unwrap();
        let back = parse_jsonl(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(back, entries);
    }

    #[test]
    fn format_names() {
        assert_eq!("CSV".parse::<ExportFormat>().unwrap(), ExportFormat::Csv);
        assert!(matches!("xml".parse::<ExportFormat>(), Err(TimelineError::UnsupportedFormat(_))));
    }
}
