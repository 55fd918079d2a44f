use flate2::{Decompress, FlushDecompress, Status};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::DataChunk;

/// Inflated output larger than this is treated as hostile.
pub const MAX_INFLATED_LEN: usize = 256 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InflateError {
    #[error("chunk has no compressed payload")]
    EmptyPayload,
    #[error("inflate failed: {0}")]
    Failed(String),
    #[error("compressed stream ends before its final block")]
    Incomplete,
    #[error("inflated payload exceeds {MAX_INFLATED_LEN} bytes")]
    TooLarge,
}

/// Which bytes the stored CRC-32 covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrcMatch {
    OverCompressed,
    OverDecompressed,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrcCheck {
    pub ok: bool,
    pub mode: CrcMatch,
    /// Set when the payload could not be inflated; `mode` then reflects the
    /// compressed bytes only.
    pub inflate_error: Option<InflateError>,
}

/// Standard CRC-32 (reflected 0x04C11DB7, init and final XOR 0xFFFFFFFF).
pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

fn inflate_with(input: &[u8], zlib: bool) -> Result<Vec<u8>, InflateError> {
    let mut d = Decompress::new(zlib);
    let mut out = Vec::with_capacity(input.len().saturating_mul(4).clamp(64, 1 << 20));
    loop {
        if out.len() == out.capacity() {
            if out.len() >= MAX_INFLATED_LEN {
                return Err(InflateError::TooLarge);
            }
            out.reserve(out.len().max(4096));
        }
        let consumed = d.total_in() as usize;
        let produced = d.total_out();
        let status = d
            .decompress_vec(&input[consumed..], &mut out, FlushDecompress::None)
            .map_err(|e| InflateError::Failed(e.to_string()))?;
        match status {
            Status::StreamEnd => return Ok(out),
            Status::Ok | Status::BufError => {
                let stalled = d.total_in() as usize == consumed && d.total_out() == produced;
                if stalled && out.len() < out.capacity() {
                    return Err(InflateError::Incomplete);
                }
            }
        }
    }
}

fn looks_like_zlib(input: &[u8]) -> bool {
    input.len() >= 2 && input[0] & 0x0F == 8 && (u16::from(input[0]) << 8 | u16::from(input[1])) % 31 == 0
}

/// Inflates raw DEFLATE bytes. A zlib-wrapped stream is accepted as a fallback.
pub fn inflate_bytes(input: &[u8]) -> Result<Vec<u8>, InflateError> {
    if input.is_empty() {
        return Err(InflateError::EmptyPayload);
    }
    match inflate_with(input, false) {
        Ok(out) => Ok(out),
        Err(raw_err) if looks_like_zlib(input) => inflate_with(input, true).map_err(|_| raw_err),
        Err(e) => Err(e),
    }
}

/// Inflated text of a chunk plus whether invalid UTF-8 had to be replaced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InflatedText {
    pub text: String,
    pub lossy: bool,
}

pub fn inflate_payload(chunk: &DataChunk) -> Result<InflatedText, InflateError> {
    inflate_bytes(&chunk.deflate_payload).map(bytes_to_text)
}

pub(crate) fn bytes_to_text(bytes: Vec<u8>) -> InflatedText {
    match String::from_utf8(bytes) {
        Ok(text) => InflatedText { text, lossy: false },
        Err(e) => InflatedText { text: String::from_utf8_lossy(e.as_bytes()).into_owned(), lossy: true },
    }
}

/// Verification plus the inflated bytes, so callers inflate only once.
pub(crate) fn check_and_inflate(chunk: &DataChunk) -> (CrcCheck, Result<Vec<u8>, InflateError>) {
    let inflated = inflate_bytes(&chunk.deflate_payload);
    let mode = if crc32(&chunk.deflate_payload) == chunk.crc32 {
        CrcMatch::OverCompressed
    } else if matches!(&inflated, Ok(text) if crc32(text) == chunk.crc32) {
        CrcMatch::OverDecompressed
    } else {
        CrcMatch::Neither
    };
    let inflate_error = match (&inflated, chunk.deflate_payload.is_empty()) {
        (Err(e), false) => Some(e.clone()),
        _ => None,
    };
    let check = CrcCheck { ok: mode != CrcMatch::Neither, mode, inflate_error };
    (check, inflated)
}

/// Compares the stored CRC against the compressed payload and the inflated
/// text and reports which one matches.
pub fn verify_chunk(chunk: &DataChunk) -> CrcCheck {
    check_and_inflate(chunk).0
}
