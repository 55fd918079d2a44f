use thiserror::Error;

use super::verify::{check_and_inflate, crc32};
use crate::format::{ChunkFields, DataChunk, RbsHeader, CHUNK_HEADER_LEN};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChunkError {
    #[error("chunk at 0x{offset:x} claims sizes {base64_size}+{deflate_size} beyond any RBS body")]
    ImplausibleSizes { offset: u64, base64_size: u32, deflate_size: u32 },
    #[error("chunk at 0x{offset:x} needs {needed} bytes, only {available} remain")]
    Truncated { offset: u64, needed: u64, available: u64 },
    /// Stale bytes at a write frontier: the start of the region was
    /// overwritten by newer chunks. The surviving bytes are kept.
    #[error("torn chunk at 0x{offset:x} ({} bytes preserved)", bytes.len())]
    Torn { offset: u64, bytes: Vec<u8> },
}

impl ChunkError {
    pub fn offset(&self) -> u64 {
        match self {
            ChunkError::ImplausibleSizes { offset, .. }
            | ChunkError::Truncated { offset, .. }
            | ChunkError::Torn { offset, .. } => *offset,
        }
    }
}

/// Walks the chunk area of an RBS image in file-offset order.
///
/// Chunks are parsed back to back from the end of the header. When the walk
/// breaks (zero padding, implausible sizes, truncation, or a damaged chunk at
/// the header's write frontier) the remaining body is scanned for the next
/// chunk whose CRC validates, so older chunks behind a ring-buffer wrap are
/// still collected. Every step consumes at least one byte, so iteration
/// always terminates.
pub struct ChunkIter<'a> {
    data: &'a [u8],
    pos: usize,
    frontiers: Vec<u64>,
    max_index: u32,
    body_limit: u64,
    done: bool,
}

/// Iterates the chunks of `data`, a full RBS image whose header is `header`.
pub fn iterate_chunks<'a>(data: &'a [u8], header: &RbsHeader) -> ChunkIter<'a> {
    let header_len = header.len();
    let capacity = (data.len() as u64).max(header.nominal_size());
    ChunkIter {
        data,
        pos: header_len,
        frontiers: header.frontiers(),
        max_index: header.max_chunk_index(),
        body_limit: capacity.saturating_sub(header_len as u64),
        done: false,
    }
}

fn is_zero(window: &[u8]) -> bool {
    window.iter().all(|&b| b == 0)
}

impl ChunkIter<'_> {
    fn at_frontier(&self, pos: usize) -> bool {
        self.frontiers.contains(&(pos as u64))
    }

    /// A chunk counts as recovered only if its CRC validates under either
    /// coverage; that makes a false resync 2^-32 unlikely per candidate.
    fn validates(chunk: &DataChunk) -> bool {
        if crc32(&chunk.deflate_payload) == chunk.crc32 {
            return true;
        }
        check_and_inflate(chunk).0.ok
    }

    fn candidate_at(&self, q: usize) -> Option<usize> {
        let fields = ChunkFields::parse(&self.data[q..])?;
        if fields.deflate_size == 0
            || fields.record_count == 0
            || fields.chunk_index > self.max_index
            || fields.encoded_len() > (self.data.len() - q) as u64
        {
            return None;
        }
        let chunk = DataChunk::from_slice(self.data, q)?;
        Self::validates(&chunk).then_some(q)
    }

    /// Next position at or after `from` holding a validating chunk.
    fn resync(&self, from: usize) -> Option<usize> {
        let len = self.data.len();
        let mut q = from;
        while q + CHUNK_HEADER_LEN <= len {
            let window = &self.data[q..q + CHUNK_HEADER_LEN];
            if is_zero(window) {
                // jump to the first window that can contain a nonzero byte
                let nz = self.data[q + CHUNK_HEADER_LEN..].iter().position(|&b| b != 0)?;
                q = (q + CHUNK_HEADER_LEN + nz + 1).saturating_sub(CHUNK_HEADER_LEN).max(q + 1);
                continue;
            }
            if let Some(found) = self.candidate_at(q) {
                return Some(found);
            }
            q += 1;
        }
        None
    }

    fn torn_region(&self, start: usize, resume: Option<usize>) -> Vec<u8> {
        let end = resume.unwrap_or(self.data.len());
        let region = &self.data[start..end];
        let keep = region.iter().rposition(|&b| b != 0).map_or(0, |p| p + 1);
        region[..keep].to_vec()
    }

    fn broken(&mut self, pos: usize, err: ChunkError) -> ChunkError {
        let resume = self.resync(pos + 1);
        let err = if self.at_frontier(pos) {
            ChunkError::Torn { offset: pos as u64, bytes: self.torn_region(pos, resume) }
        } else {
            err
        };
        match resume {
            Some(r) => self.pos = r,
            None => self.done = true,
        }
        err
    }
}

impl Iterator for ChunkIter<'_> {
    type Item = Result<DataChunk, ChunkError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done {
                return None;
            }
            let pos = self.pos;
            let len = self.data.len();
            if pos >= len {
                self.done = true;
                return None;
            }
            if len - pos < CHUNK_HEADER_LEN {
                self.done = true;
                if is_zero(&self.data[pos..]) {
                    return None;
                }
                return Some(Err(ChunkError::Truncated {
                    offset: pos as u64,
                    needed: CHUNK_HEADER_LEN as u64,
                    available: (len - pos) as u64,
                }));
            }
            if is_zero(&self.data[pos..pos + CHUNK_HEADER_LEN]) {
                // padding; older chunks may still follow after a wrap
                match self.resync(pos) {
                    Some(r) => {
                        self.pos = r;
                        continue;
                    }
                    None => {
                        self.done = true;
                        return None;
                    }
                }
            }
            let fields = ChunkFields::parse(&self.data[pos..]).expect("window checked");
            let needed = fields.encoded_len();
            if needed - CHUNK_HEADER_LEN as u64 > self.body_limit {
                let err = ChunkError::ImplausibleSizes {
                    offset: pos as u64,
                    base64_size: fields.base64_size,
                    deflate_size: fields.deflate_size,
                };
                return Some(Err(self.broken(pos, err)));
            }
            let available = (len - pos) as u64;
            if needed > available {
                let err = ChunkError::Truncated { offset: pos as u64, needed, available };
                return Some(Err(self.broken(pos, err)));
            }
            let chunk = DataChunk::from_slice(self.data, pos).expect("size checked");
            if self.at_frontier(pos) && !Self::validates(&chunk) {
                // damaged data at the write cursor: its sizes cannot be trusted
                let err = ChunkError::Torn { offset: pos as u64, bytes: Vec::new() };
                return Some(Err(self.broken(pos, err)));
            }
            self.pos = pos + needed as usize;
            return Some(Ok(chunk));
        }
    }
}
