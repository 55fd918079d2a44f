//! Decoding of RBS images into telemetry records.
//!
//! Only a bad file header is fatal. Everything below it (torn chunks, CRC
//! mismatches, corrupt DEFLATE streams, malformed JSON) degrades to entries
//! in [`ReadReport::warnings`], and whatever can be salvaged is returned.
//!
//! Records come out in chunk-index order, not file-offset order: after a
//! ring-buffer wrap the oldest surviving chunk sits behind the newest one.

mod chunks;
mod split;
mod verify;

pub use chunks::{iterate_chunks, ChunkError, ChunkIter};
pub use split::{split_records, SplitError, SplitRecords};
pub use verify::{
    crc32, inflate_bytes, inflate_payload, verify_chunk, CrcCheck, CrcMatch, InflateError, InflatedText,
    MAX_INFLATED_LEN,
};

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::{DataChunk, HeaderError, HeaderIssue, Provenance, RbsHeader, TelemetryRecord};

/// Parses the file header at the start of `bytes`.
pub fn parse_header(bytes: &[u8]) -> Result<RbsHeader, HeaderError> {
    RbsHeader::parse(bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    CursorMismatch,
    HeaderOffsetOutOfRange,
    ImplausibleTimestamp,
    ImplausibleSizes,
    Truncated,
    ChunkTorn,
    CrcMismatch,
    InflateFailed,
    InvalidUtf8,
    NoValidJson,
    CountMismatch,
    MalformedRecord,
    RecordRejected,
    NonJsonBytes,
    Base64Shape,
    DuplicateIndex,
    IndexGap,
}

impl fmt::Display for WarningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned));
        f.write_str(s.as_deref().unwrap_or("unknown"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub offset: u64,
    pub kind: WarningKind,
    pub message: String,
}

impl Warning {
    pub fn new(offset: u64, kind: WarningKind, message: impl Into<String>) -> Self {
        Warning { offset, kind, message: message.into() }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:08x} {}: {}", self.offset, self.kind, self.message)
    }
}

/// CRC coverage seen across all chunks whose CRC validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrcModeObserved {
    OverCompressed,
    OverDecompressed,
    Mixed,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReadReport {
    pub header: RbsHeader,
    pub chunks_ok: usize,
    pub chunks_failed: usize,
    pub records: usize,
    pub warnings: Vec<Warning>,
    pub crc_mode_observed: CrcModeObserved,
}

impl ReadReport {
    pub fn is_clean(&self) -> bool {
        self.chunks_failed == 0 && self.warnings.is_empty()
    }
}

/// A chunk after verification and decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedChunk {
    pub chunk: DataChunk,
    pub crc: CrcCheck,
    /// Inflated payload text, kept only when [`ReadOptions::keep_text`] is set.
    pub text: Option<String>,
    pub records: Vec<TelemetryRecord>,
    pub ok: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ReadOptions {
    /// Label stored in each record's provenance; usually the file path.
    pub source: String,
    pub keep_text: bool,
}

impl ReadOptions {
    pub fn source(source: impl Into<String>) -> Self {
        ReadOptions { source: source.into(), keep_text: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadOutput {
    /// Chunks in ascending chunk-index order.
    pub chunks: Vec<DecodedChunk>,
    pub report: ReadReport,
}

impl ReadOutput {
    pub fn header(&self) -> &RbsHeader {
        &self.report.header
    }

    /// Records in logical order (chunk index, then position in chunk).
    pub fn records(&self) -> impl Iterator<Item = &TelemetryRecord> {
        self.chunks.iter().flat_map(|c| c.records.iter())
    }

    pub fn into_parts(self) -> (Vec<TelemetryRecord>, ReadReport) {
        let records = self.chunks.into_iter().flat_map(|c| c.records).collect();
        (records, self.report)
    }
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Header(#[from] HeaderError),
}

fn header_warnings(header: &RbsHeader, file_len: u64) -> Vec<Warning> {
    let bound = file_len.max(header.len() as u64 + 1);
    header
        .issues(bound)
        .into_iter()
        .map(|issue| match issue {
            HeaderIssue::CursorMismatch => Warning::new(
                0x10,
                WarningKind::CursorMismatch,
                format!(
                    "cursor copies differ: offsets 0x{:x}/0x{:x}, indices {}/{}",
                    header.last_chunk_offset_1,
                    header.last_chunk_offset_2,
                    header.last_chunk_index_1,
                    header.last_chunk_index_2
                ),
            ),
            HeaderIssue::OffsetOutOfRange { field, value } => Warning::new(
                0x10,
                WarningKind::HeaderOffsetOutOfRange,
                format!("{field} = 0x{value:x} is outside the chunk area"),
            ),
            HeaderIssue::ImplausibleTimestamp => Warning::new(
                0x08,
                WarningKind::ImplausibleTimestamp,
                format!("last-modified {} is past year 9999", header.last_modified_iso()),
            ),
        })
        .collect()
}

fn chunk_error_warning(err: &ChunkError) -> Warning {
    let kind = match err {
        ChunkError::ImplausibleSizes { .. } => WarningKind::ImplausibleSizes,
        ChunkError::Truncated { .. } => WarningKind::Truncated,
        ChunkError::Torn { .. } => WarningKind::ChunkTorn,
    };
    Warning::new(err.offset(), kind, err.to_string())
}

fn decode_chunk(
    chunk: DataChunk,
    provenance: &Provenance,
    keep_text: bool,
    warnings: &mut Vec<Warning>,
) -> DecodedChunk {
    let at = chunk.file_offset;
    if !chunk.base64_shape_ok() {
        warnings.push(Warning::new(
            at,
            WarningKind::Base64Shape,
            format!("Base64 section of {} bytes is not well-formed", chunk.base64_payload.len()),
        ));
    }
    let (crc, inflated) = verify::check_and_inflate(&chunk);
    let mut ok = crc.ok;
    if !crc.ok {
        warnings.push(Warning::new(
            at,
            WarningKind::CrcMismatch,
            format!("chunk {} stored CRC 0x{:08x} matches neither payload", chunk.chunk_index, chunk.crc32),
        ));
    }
    let mut records = Vec::new();
    let mut text = None;
    match inflated {
        Ok(bytes) => {
            let InflatedText { text: body, lossy } = verify::bytes_to_text(bytes);
            if lossy {
                warnings.push(Warning::new(at, WarningKind::InvalidUtf8, "invalid UTF-8 replaced in payload"));
            }
            match split_records(&body, chunk.record_count) {
                Ok(split) => {
                    for w in split.warnings {
                        warnings.push(Warning::new(
                            at,
                            w.kind,
                            format!("chunk {} text+{}: {}", chunk.chunk_index, w.offset, w.message),
                        ));
                    }
                    records = split.records;
                }
                Err(e) => {
                    ok = false;
                    warnings.push(Warning::new(
                        at,
                        WarningKind::NoValidJson,
                        format!("chunk {}: {e}", chunk.chunk_index),
                    ));
                }
            }
            if keep_text {
                text = Some(body);
            }
        }
        Err(InflateError::EmptyPayload) => {}
        Err(e) => {
            ok = false;
            warnings.push(Warning::new(at, WarningKind::InflateFailed, format!("chunk {}: {e}", chunk.chunk_index)));
        }
    }
    for (i, rec) in records.iter_mut().enumerate() {
        rec.provenance = Provenance {
            chunk_index: chunk.chunk_index,
            chunk_offset: chunk.file_offset,
            record_index: i as u32,
            ..provenance.clone()
        };
    }
    DecodedChunk { chunk, crc, text, records, ok }
}

/// Decodes a complete RBS image held in memory.
pub fn read_bytes(data: &[u8], options: &ReadOptions) -> Result<ReadOutput, HeaderError> {
    let header = parse_header(data)?;
    let mut warnings = header_warnings(&header, data.len() as u64);
    let mut failed = 0;

    let mut raw = Vec::new();
    for item in iterate_chunks(data, &header) {
        match item {
            Ok(chunk) => raw.push(chunk),
            Err(e) => {
                failed += 1;
                warnings.push(chunk_error_warning(&e));
            }
        }
    }
    raw.sort_by_key(|c| (c.chunk_index, c.file_offset));

    for pair in raw.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.chunk_index == b.chunk_index {
            warnings.push(Warning::new(
                b.file_offset,
                WarningKind::DuplicateIndex,
                format!("chunk index {} also at 0x{:x}", b.chunk_index, a.file_offset),
            ));
        } else if b.chunk_index - a.chunk_index > 1 {
            warnings.push(Warning::new(
                b.file_offset,
                WarningKind::IndexGap,
                format!("chunk indices jump from {} to {}", a.chunk_index, b.chunk_index),
            ));
        }
    }

    let provenance =
        Provenance { source_file: options.source.clone(), file_type: header.file_type, ..Default::default() };
    let mut chunks = Vec::with_capacity(raw.len());
    let (mut saw_compressed, mut saw_decompressed) = (false, false);
    for chunk in raw {
        let decoded = decode_chunk(chunk, &provenance, options.keep_text, &mut warnings);
        match decoded.crc.mode {
            CrcMatch::OverCompressed => saw_compressed = true,
            CrcMatch::OverDecompressed => saw_decompressed = true,
            CrcMatch::Neither => {}
        }
        if !decoded.ok {
            failed += 1;
        }
        chunks.push(decoded);
    }

    let crc_mode_observed = match (saw_compressed, saw_decompressed) {
        (true, false) => CrcModeObserved::OverCompressed,
        (false, true) => CrcModeObserved::OverDecompressed,
        (true, true) => CrcModeObserved::Mixed,
        (false, false) => CrcModeObserved::Undetermined,
    };
    let report = ReadReport {
        header,
        chunks_ok: chunks.iter().filter(|c| c.ok).count(),
        chunks_failed: failed,
        records: chunks.iter().map(|c| c.records.len()).sum(),
        warnings,
        crc_mode_observed,
    };
    Ok(ReadOutput { chunks, report })
}

/// Reads an RBS image from any byte source.
pub fn read_from(mut source: impl Read, options: &ReadOptions) -> Result<ReadOutput, ReadError> {
    let mut data = Vec::new();
    source.read_to_end(&mut data)?;
    Ok(read_bytes(&data, options)?)
}

/// Reads an RBS file from disk; the path becomes the provenance label.
pub fn read_file(path: impl AsRef<Path>) -> Result<ReadOutput, ReadError> {
    let path = path.as_ref();
    let data = std::fs::read(path)?;
    let options = ReadOptions::source(path.display().to_string());
    Ok(read_bytes(&data, &options)?)
}
