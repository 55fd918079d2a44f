//! Signature carving of RBS images from raw byte streams.
//!
//! A hit is any `UTCRBES` followed by a known revision digit. The header at
//! the hit decides the carve size: a valid file type selects the fixed size
//! for that version, otherwise the chunk area is walked until it stops
//! validating. UTCRBES3 images are carved at the larger 1511 size because
//! the two legacy grids cannot be told apart from the header.

use std::io::{self, Read, Seek, SeekFrom};

use memchr::memmem;
use serde::{Deserialize, Serialize};

use crate::format::{
    DataChunk, RbsFileType, RbsHeader, RbsVersion, CHUNK_HEADER_LEN, MAX_HEADER_LEN, SIGNATURE_PREFIX,
};
use crate::reader::verify_chunk;

/// Default read window for [`scan`].
pub const DEFAULT_WINDOW: usize = 8 << 20;

const SIGNATURE_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Confidence {
    /// The header validates and the full fixed size is present.
    High,
    /// Signature only, a damaged header, or an image cut short.
    Low,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarveHit {
    pub offset: u64,
    pub version: RbsVersion,
    pub file_type: Option<RbsFileType>,
    pub carved_size: u64,
    /// Fixed size for (version, file type), when the type is known.
    pub nominal_size: Option<u64>,
    pub confidence: Confidence,
    pub notes: Vec<String>,
}

impl CarveHit {
    /// Output name, `carve_<offset>_<type>.rbs`.
    pub fn file_name(&self) -> String {
        let ty = self.file_type.map_or("unknown", RbsFileType::name);
        format!("carve_{}_{}.rbs", self.offset, ty)
    }
}

/// Bytes returned by [`extract`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Carved {
    pub bytes: Vec<u8>,
    /// Number of zero bytes appended because the source ended early.
    pub padded: u64,
    pub warnings: Vec<String>,
}

fn stream_len<S: Seek>(stream: &mut S) -> io::Result<u64> {
    let end = stream.seek(SeekFrom::End(0))?;
    Ok(end)
}

fn read_at<S: Read + Seek>(stream: &mut S, offset: u64, len: u64) -> io::Result<Vec<u8>> {
    stream.seek(SeekFrom::Start(offset))?;
    let mut buf = Vec::new();
    stream.by_ref().take(len).read_to_end(&mut buf)?;
    Ok(buf)
}

/// Offsets of every `UTCRBES<digit>` with a known digit, reading `window`
/// bytes at a time. Consecutive windows overlap by seven bytes so a
/// signature split across a boundary is still seen exactly once.
pub fn find_signatures<R: Read>(mut stream: R, window: usize) -> io::Result<Vec<u64>> {
    let window = window.max(SIGNATURE_LEN * 2);
    let finder = memmem::Finder::new(SIGNATURE_PREFIX);
    let mut hits = Vec::new();
    let mut buf = vec![0u8; window];
    let mut carry = 0usize;
    let mut base = 0u64; // stream offset of buf[0]
    loop {
        let mut filled = carry;
        while filled < buf.len() {
            match stream.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        let eof = filled < buf.len();
        let view = &buf[..filled];
        for pos in finder.find_iter(view) {
            if pos + SIGNATURE_LEN > filled {
                continue; // completed in the next window
            }
            if RbsVersion::from_digit(view[pos + 7]).is_some() {
                hits.push(base + pos as u64);
            }
        }
        if eof {
            return Ok(hits);
        }
        carry = SIGNATURE_LEN - 1;
        buf.copy_within(filled - carry.., 0);
        base += (filled - carry) as u64;
    }
}

/// Chunk-area walk for a hit whose fixed size is unknown: back-to-back chunks
/// are accepted while their CRC validates. Returns the end of the last one.
fn walk_extent(image: &[u8], header_len: usize) -> u64 {
    let mut pos = header_len.min(image.len());
    while pos + CHUNK_HEADER_LEN <= image.len() {
        let Some(chunk) = DataChunk::from_slice(image, pos) else { break };
        if chunk.record_count == 0 || !verify_chunk(&chunk).ok {
            break;
        }
        pos += chunk.encoded_len() as usize;
    }
    pos as u64
}

fn evaluate<S: Read + Seek>(stream: &mut S, offset: u64, total: u64) -> io::Result<CarveHit> {
    let available = total - offset;
    let head = read_at(stream, offset, MAX_HEADER_LEN as u64)?;
    let version = RbsVersion::from_signature(&head[..SIGNATURE_LEN]).expect("signature gated");
    let mut notes = Vec::new();
    let parsed = RbsHeader::parse(&head);
    if let Err(e) = &parsed {
        notes.push(format!("header: {e}"));
    }
    let file_type = match &parsed {
        Ok(h) => Some(h.file_type),
        Err(_) if head.len() >= 0x2A => RbsFileType::from_code(u16::from_le_bytes([head[0x28], head[0x29]])),
        Err(_) => None,
    };
    if version.is_legacy() {
        notes.push("UTCRBES3 sized with the 1511 grid".to_string());
    }

    let Some(file_type) = file_type else {
        let limit = available.min(crate::format::max_fixed_size());
        let image = read_at(stream, offset, limit)?;
        let extent = walk_extent(&image, version.header_len()).max(head.len().min(version.header_len()) as u64);
        notes.push(format!("file type unknown; carved {extent} bytes by chunk walk"));
        return Ok(CarveHit {
            offset,
            version,
            file_type: None,
            carved_size: extent,
            nominal_size: None,
            confidence: Confidence::Low,
            notes,
        });
    };

    let nominal = version.nominal_size(file_type);
    let carved_size = nominal.min(available);
    let mut high = parsed.is_ok();
    if carved_size < nominal {
        high = false;
        notes.push(format!("image ends {} bytes short of the fixed size", nominal - carved_size));
    }
    if let Ok(h) = &parsed {
        for issue in h.issues(nominal) {
            high = false;
            notes.push(format!("header: {issue:?}"));
        }
    }
    Ok(CarveHit {
        offset,
        version,
        file_type: Some(file_type),
        carved_size,
        nominal_size: Some(nominal),
        confidence: if high { Confidence::High } else { Confidence::Low },
        notes,
    })
}

/// Scans a stream for embedded RBS images. Hits are returned in offset
/// order; a malformed header lowers confidence but never aborts the scan.
pub fn scan<S: Read + Seek>(stream: &mut S, window: usize) -> io::Result<Vec<CarveHit>> {
    let total = stream_len(stream)?;
    stream.seek(SeekFrom::Start(0))?;
    let offsets = find_signatures(&mut *stream, window)?;
    offsets.into_iter().map(|off| evaluate(stream, off, total)).collect()
}

/// Scans an in-memory image.
pub fn scan_bytes(data: &[u8]) -> Vec<CarveHit> {
    scan(&mut io::Cursor::new(data), DEFAULT_WINDOW).expect("in-memory reads do not fail")
}

/// Copies `hit.carved_size` bytes from `hit.offset`. When the source ends
/// before the fixed size, the result is zero-padded to it and a warning is
/// recorded, so carves of the same image hash identically.
pub fn extract<S: Read + Seek>(stream: &mut S, hit: &CarveHit) -> io::Result<Carved> {
    let total = stream_len(stream)?;
    if hit.offset >= total {
        return Err(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            format!("hit offset {} is beyond the end of the stream ({total} bytes)", hit.offset),
        ));
    }
    let want = hit.nominal_size.unwrap_or(hit.carved_size).max(hit.carved_size);
    let mut bytes = read_at(stream, hit.offset, want)?;
    let mut warnings = Vec::new();
    let padded = want - bytes.len() as u64;
    if padded > 0 {
        warnings
            .push(format!("source ends {} bytes into the image; zero-padded {padded} bytes to {want}", bytes.len()));
        bytes.resize(want as usize, 0);
    }
    Ok(Carved { bytes, padded, warnings })
}
