//! Synthetic RBS image generator for tests and fixtures.
//!
//! Output mimics the published layout only: header fields, chunk framing,
//! zero padding and ring-buffer overwrite. The Base64 section is filled with
//! random bytes because the content real DiagTrack writes there is unknown.
//! CRCs are computed over the compressed payload.
//!
//! When a chunk does not fit before the fixed end of the file, writing wraps
//! to the first byte after the header and overwrites whatever is there.
//! Chunk indices keep increasing across wraps. `total_chunk_size` in the
//! header accumulates monotonically.

use std::io::Write;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use chrono::Utc;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use thiserror::Error;

use crate::format::{datetime_to_filetime, ChunkFields, RbsFileType, RbsHeader, RbsVersion, CHUNK_HEADER_LEN};
use crate::reader::{crc32, iterate_chunks, parse_header};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriterConfig {
    pub version: RbsVersion,
    pub file_type: RbsFileType,
    /// Overrides the fixed size from the size table. Small values make
    /// wraparound cheap to exercise.
    pub fixed_size_override: Option<u64>,
    /// Length of the random Base64 text per chunk; must be a multiple of 4.
    pub base64_blob_size: usize,
    pub start_chunk_index: u32,
    /// Header FILETIME; `None` uses the current time.
    pub timestamp: Option<u64>,
    /// Separate records with `\n` instead of writing them back to back.
    pub newline_separated: bool,
    pub compression_level: u32,
    /// Seed for the Base64 filler.
    pub seed: u64,
}

impl WriterConfig {
    pub fn new(version: RbsVersion, file_type: RbsFileType) -> Self {
        WriterConfig {
            version,
            file_type,
            fixed_size_override: None,
            base64_blob_size: 0,
            start_chunk_index: 0,
            timestamp: None,
            newline_separated: false,
            compression_level: 6,
            seed: 0,
        }
    }

    pub fn with_size(mut self, bytes: u64) -> Self {
        self.fixed_size_override = Some(bytes);
        self
    }

    pub fn with_timestamp(mut self, filetime: u64) -> Self {
        self.timestamp = Some(filetime);
        self
    }

    pub fn fixed_size(&self) -> u64 {
        self.fixed_size_override.unwrap_or_else(|| self.version.nominal_size(self.file_type))
    }

    /// Header plus the smallest possible chunk (an empty stored DEFLATE block).
    pub fn minimum_size(&self) -> u64 {
        (self.version.header_len() + CHUNK_HEADER_LEN + self.base64_blob_size + 2) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WriterError {
    #[error("batch {0} is empty")]
    EmptyBatch(usize),
    #[error("chunk of {needed} bytes cannot fit in a body of {capacity} bytes")]
    BatchTooLarge { needed: u64, capacity: u64 },
    #[error("fixed size {size} is below the minimum of {minimum} bytes")]
    SizeTooSmall { size: u64, minimum: u64 },
    #[error("fixed size {0} does not fit 32-bit offsets")]
    SizeTooLarge(u64),
    #[error("Base64 blob size {0} is not a multiple of 4")]
    Base64Size(usize),
    #[error("serializing record failed: {0}")]
    Serialize(String),
}

/// Where a chunk landed in the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub chunk_index: u32,
    pub offset: u64,
    pub len: u64,
    /// This chunk was written after wrapping back to the start of the body.
    pub wrapped: bool,
}

/// Incremental image builder; [`write_fixture`] wraps it for one-shot use.
pub struct FixtureWriter {
    config: WriterConfig,
    image: Vec<u8>,
    header: RbsHeader,
    cursor: usize,
    next_index: u32,
    rng: ChaCha8Rng,
    placements: Vec<Placement>,
}

impl FixtureWriter {
    pub fn new(config: WriterConfig) -> Result<Self, WriterError> {
        let size = config.fixed_size();
        let minimum = config.minimum_size();
        if size < minimum {
            return Err(WriterError::SizeTooSmall { size, minimum });
        }
        if size > u32::MAX as u64 {
            return Err(WriterError::SizeTooLarge(size));
        }
        if !config.base64_blob_size.is_multiple_of(4) {
            return Err(WriterError::Base64Size(config.base64_blob_size));
        }
        let timestamp = config.timestamp.or_else(|| datetime_to_filetime(&Utc::now())).unwrap_or_default();
        let mut header = RbsHeader::empty(config.version, config.file_type, timestamp);
        header.last_chunk_index_1 = config.start_chunk_index;
        header.last_chunk_index_2 = config.start_chunk_index;
        Ok(FixtureWriter {
            image: vec![0u8; size as usize],
            cursor: config.version.header_len(),
            next_index: config.start_chunk_index,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            placements: Vec::new(),
            header,
            config,
        })
    }

    fn serialize(&self, records: &[Value]) -> Result<Vec<u8>, WriterError> {
        let mut text = Vec::new();
        for (i, rec) in records.iter().enumerate() {
            if i > 0 && self.config.newline_separated {
                text.push(b'\n');
            }
            serde_json::to_writer(&mut text, rec).map_err(|e| WriterError::Serialize(e.to_string()))?;
        }
        Ok(text)
    }

    fn base64_blob(&mut self) -> Vec<u8> {
        let chars = self.config.base64_blob_size;
        if chars == 0 {
            return Vec::new();
        }
        // one byte short of a full final group, so the text ends in '='
        let mut raw = vec![0u8; chars / 4 * 3 - 1];
        self.rng.fill_bytes(&mut raw);
        STANDARD.encode(raw).into_bytes()
    }

    /// Encodes one batch into a complete chunk (header and both sections).
    pub fn encode_chunk(&mut self, records: &[Value], chunk_index: u32) -> Result<Vec<u8>, WriterError> {
        let text = self.serialize(records)?;
        let mut enc = DeflateEncoder::new(Vec::new(), Compression::new(self.config.compression_level.min(9)));
        enc.write_all(&text).map_err(|e| WriterError::Serialize(e.to_string()))?;
        let deflated = enc.finish().map_err(|e| WriterError::Serialize(e.to_string()))?;
        let blob = self.base64_blob();
        let fields = ChunkFields {
            crc32: crc32(&deflated),
            chunk_index,
            base64_size: blob.len() as u32,
            deflate_size: deflated.len() as u32,
            record_count: records.len() as u32,
            reserved: [0; 2],
        };
        let mut out = Vec::with_capacity(fields.encoded_len() as usize);
        out.extend_from_slice(&fields.to_bytes());
        out.extend_from_slice(&blob);
        out.extend_from_slice(&deflated);
        Ok(out)
    }

    /// Appends one chunk holding `records`.
    pub fn append(&mut self, records: &[Value]) -> Result<Placement, WriterError> {
        if records.is_empty() {
            return Err(WriterError::EmptyBatch(self.placements.len()));
        }
        let index = self.next_index;
        let bytes = self.encode_chunk(records, index)?;
        let header_len = self.config.version.header_len();
        let capacity = (self.image.len() - header_len) as u64;
        if bytes.len() as u64 > capacity {
            return Err(WriterError::BatchTooLarge { needed: bytes.len() as u64, capacity });
        }
        let mut wrapped = false;
        if self.cursor + bytes.len() > self.image.len() {
            self.cursor = header_len;
            wrapped = true;
        }
        let offset = self.cursor;
        self.image[offset..offset + bytes.len()].copy_from_slice(&bytes);
        self.cursor += bytes.len();
        self.next_index = index.wrapping_add(1);

        let h = &mut self.header;
        h.last_chunk_offset_1 = offset as u32;
        h.last_chunk_offset_2 = offset as u32;
        h.last_chunk_size = bytes.len() as u32;
        h.total_chunk_size = h.total_chunk_size.wrapping_add(bytes.len() as u32);
        h.last_chunk_index_1 = index;
        h.last_chunk_index_2 = index;

        let placement = Placement { chunk_index: index, offset: offset as u64, len: bytes.len() as u64, wrapped };
        self.placements.push(placement);
        Ok(placement)
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn header(&self) -> &RbsHeader {
        &self.header
    }

    /// Body bytes available to chunks.
    pub fn body_capacity(&self) -> u64 {
        (self.image.len() - self.config.version.header_len()) as u64
    }

    pub fn finish(mut self) -> Vec<u8> {
        let header = self.header.to_bytes();
        self.image[..header.len()].copy_from_slice(&header);
        self.image
    }
}

/// Builds a complete image with one chunk per batch.
pub fn write_fixture(config: &WriterConfig, batches: &[Vec<Value>]) -> Result<Vec<u8>, WriterError> {
    let mut writer = FixtureWriter::new(config.clone())?;
    for batch in batches {
        writer.append(batch)?;
    }
    Ok(writer.finish())
}

/// Single-site mutations for corruption tests. `chunk` selects a chunk by
/// position in file-offset order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionSite {
    /// XOR one byte of the DEFLATE section with 0xFF.
    PayloadByteFlip { chunk: usize, byte: usize },
    /// Overwrite the DEFLATE size field.
    SizeField { chunk: usize, deflate_size: u32 },
    /// Invert the stored CRC.
    CrcField { chunk: usize },
    /// Change the first signature byte.
    SignatureByte,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorruptError {
    #[error("fixture is not parseable: {0}")]
    Unparseable(String),
    #[error("corruption site not found: {0}")]
    SiteNotFound(String),
}

/// Applies one deterministic mutation to a copy of `fixture`.
pub fn corrupt(fixture: &[u8], site: CorruptionSite) -> Result<Vec<u8>, CorruptError> {
    let header = parse_header(fixture).map_err(|e| CorruptError::Unparseable(e.to_string()))?;
    let mut out = fixture.to_vec();
    if site == CorruptionSite::SignatureByte {
        out[0] ^= 0x20;
        return Ok(out);
    }
    let nth = match site {
        CorruptionSite::PayloadByteFlip { chunk, .. }
        | CorruptionSite::SizeField { chunk, .. }
        | CorruptionSite::CrcField { chunk } => chunk,
        CorruptionSite::SignatureByte => unreachable!(),
    };
    let target = iterate_chunks(fixture, &header)
        .filter_map(Result::ok)
        .nth(nth)
        .ok_or_else(|| CorruptError::SiteNotFound(format!("no chunk #{nth}")))?;
    let at = target.file_offset as usize;
    match site {
        CorruptionSite::PayloadByteFlip { byte, .. } => {
            if byte >= target.deflate_payload.len() {
                return Err(CorruptError::SiteNotFound(format!(
                    "payload byte {byte} beyond {} bytes",
                    target.deflate_payload.len()
                )));
            }
            out[at + CHUNK_HEADER_LEN + target.base64_payload.len() + byte] ^= 0xFF;
        }
        CorruptionSite::SizeField { deflate_size, .. } => {
            out[at + 0x0C..at + 0x10].copy_from_slice(&deflate_size.to_le_bytes());
        }
        CorruptionSite::CrcField { .. } => {
            for b in &mut out[at..at + 4] {
                *b ^= 0xFF;
            }
        }
        CorruptionSite::SignatureByte => unreachable!(),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::HEADER_LEN;
    use serde_json::json;

    fn cfg() -> WriterConfig {
        WriterConfig::new(RbsVersion::V8, RbsFileType::Realtime)
            .with_size(64 * 1024)
            .with_timestamp(132_000_000_000_000_000)
    }

    #[test]
    fn single_record_layout() {
        let bytes = write_fixture(&cfg(), &[vec![json!({"name": "Census.OS"})]]).unwrap();
        assert_eq!(bytes.len(), 65_536);
        assert_eq!(&bytes[..8], b"UTCRBES8");
        assert_eq!(&bytes[0x28..0x2A], &[0x03, 0x00]);
        let header = RbsHeader::parse(&bytes).unwrap();
        assert_eq!(header.last_chunk_offset_1 as usize, HEADER_LEN);
        assert!(header.cursor_consistent());
        let fields = ChunkFields::parse(&bytes[HEADER_LEN..]).unwrap();
        assert_eq!(fields.record_count, 1);
        assert_eq!(header.last_chunk_size as u64, fields.encoded_len());
        let tail = HEADER_LEN + fields.encoded_len() as usize;
        assert!(bytes[tail..].iter().all(|&b| b == 0));
    }

    #[test]
    fn no_batches_is_pristine() {
        let bytes = write_fixture(&cfg(), &[]).unwrap();
        assert_eq!(bytes.len(), 65_536);
        assert!(bytes[HEADER_LEN..].iter().all(|&b| b == 0));
    }

    #[test]
    fn default_size_comes_from_table() {
        let c = WriterConfig::new(RbsVersion::V3, RbsFileType::Realtime);
        assert_eq!(c.fixed_size(), 984 * 1024);
    }

    #[test]
    fn config_errors() {
        let tiny = cfg().with_size(10);
        assert!(matches!(FixtureWriter::new(tiny), Err(WriterError::SizeTooSmall { .. })));
        let mut odd = cfg();
        odd.base64_blob_size = 6;
        assert!(matches!(FixtureWriter::new(odd), Err(WriterError::Base64Size(6))));
        let mut w = FixtureWriter::new(cfg().with_size(256)).unwrap();
        assert_eq!(w.append(&[]), Err(WriterError::EmptyBatch(0)));
        let big: Vec<Value> = (0..50).map(|i| json!({"name": format!("E{i}"), "data": {"pad": i * 7919}})).collect();
        assert!(matches!(w.append(&big), Err(WriterError::BatchTooLarge { .. })));
    }

    #[test]
    fn base64_blob_shape() {
        let mut c = cfg();
        c.base64_blob_size = 64;
        let mut w = FixtureWriter::new(c).unwrap();
        let p = w.append(&[json!({"name": "A"})]).unwrap();
        let bytes = w.finish();
        let at = p.offset as usize + CHUNK_HEADER_LEN;
        let blob = &bytes[at..at + 64];
        assert!(blob.ends_with(b"="));
        assert!(STANDARD.decode(blob).is_ok());
    }

    #[test]
    fn wrap_keeps_indices_increasing() {
        let mut c = cfg().with_size(1024);
        c.start_chunk_index = 40;
        let mut w = FixtureWriter::new(c).unwrap();
        let batch = vec![json!({"name": "A", "data": {"v": "xxxxxxxxxxxxxxxxxxxx"}})];
        for _ in 0..40 {
            w.append(&batch).unwrap();
        }
        let p = w.placements();
        assert!(p.iter().any(|x| x.wrapped));
        assert!(p.windows(2).all(|x| x[1].chunk_index == x[0].chunk_index + 1));
        assert_eq!(w.header().last_chunk_index_1, 79);
        let last = *p.last().unwrap();
        let bytes = w.finish();
        assert_eq!(bytes.len(), 1024);
        let h = RbsHeader::parse(&bytes).unwrap();
        assert_eq!(h.last_chunk_offset_1 as u64, last.offset);
    }

    #[test]
    fn corruption_sites() {
        let bytes = write_fixture(&cfg(), &[vec![json!({"name": "A"})], vec![json!({"name": "B"})]]).unwrap();
        let sig = corrupt(&bytes, CorruptionSite::SignatureByte).unwrap();
        assert_ne!(&sig[..8], b"UTCRBES8");
        let crc = corrupt(&bytes, CorruptionSite::CrcField { chunk: 1 }).unwrap();
        assert_eq!(crc.iter().zip(&bytes).filter(|(a, b)| a != b).count(), 4);
        let flip = corrupt(&bytes, CorruptionSite::PayloadByteFlip { chunk: 0, byte: 0 }).unwrap();
        assert_eq!(flip.iter().zip(&bytes).filter(|(a, b)| a != b).count(), 1);
        assert!(matches!(corrupt(&bytes, CorruptionSite::CrcField { chunk: 2 }), Err(CorruptError::SiteNotFound(_))));
        assert!(matches!(
            corrupt(&bytes, CorruptionSite::PayloadByteFlip { chunk: 0, byte: 1 << 20 }),
            Err(CorruptError::SiteNotFound(_))
        ));
        assert!(matches!(corrupt(b"nope", CorruptionSite::SignatureByte), Err(CorruptError::Unparseable(_))));
    }
}
