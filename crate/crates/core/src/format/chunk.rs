use base64::engine::general_purpose::STANDARD;
use base64::Engine;

pub const CHUNK_HEADER_LEN: usize = 0x16;

/// The fixed 0x16-byte prefix of a data chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChunkFields {
    pub crc32: u32,
    pub chunk_index: u32,
    pub base64_size: u32,
    pub deflate_size: u32,
    pub record_count: u32,
    pub reserved: [u8; 2],
}

impl ChunkFields {
    /// Decodes the first 0x16 bytes of `bytes`. Returns `None` if too short.
    pub fn parse(bytes: &[u8]) -> Option<Self> {
        let b = bytes.get(..CHUNK_HEADER_LEN)?;
        let word = |at: usize| u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]]);
        Some(ChunkFields {
            crc32: word(0x00),
            chunk_index: word(0x04),
            base64_size: word(0x08),
            deflate_size: word(0x0C),
            record_count: word(0x10),
            reserved: [b[0x14], b[0x15]],
        })
    }

    pub fn to_bytes(&self) -> [u8; CHUNK_HEADER_LEN] {
        let mut out = [0u8; CHUNK_HEADER_LEN];
        out[0x00..0x04].copy_from_slice(&self.crc32.to_le_bytes());
        out[0x04..0x08].copy_from_slice(&self.chunk_index.to_le_bytes());
        out[0x08..0x0C].copy_from_slice(&self.base64_size.to_le_bytes());
        out[0x0C..0x10].copy_from_slice(&self.deflate_size.to_le_bytes());
        out[0x10..0x14].copy_from_slice(&self.record_count.to_le_bytes());
        out[0x14..0x16].copy_from_slice(&self.reserved);
        out
    }

    /// Total encoded length including both payload sections.
    pub fn encoded_len(&self) -> u64 {
        CHUNK_HEADER_LEN as u64 + self.base64_size as u64 + self.deflate_size as u64
    }

    pub fn is_empty(&self) -> bool {
        self.base64_size == 0 && self.deflate_size == 0 && self.record_count == 0
    }
}

/// One data chunk with its payload sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataChunk {
    pub crc32: u32,
    pub chunk_index: u32,
    pub base64_size: u32,
    pub deflate_size: u32,
    pub record_count: u32,
    pub reserved: [u8; 2],
    /// ASCII Base64 text, kept verbatim. Its meaning is unknown.
    pub base64_payload: Vec<u8>,
    /// Raw DEFLATE stream carrying concatenated JSON records.
    pub deflate_payload: Vec<u8>,
    /// File offset of the chunk header.
    pub file_offset: u64,
}

impl DataChunk {
    /// Slices a chunk out of `data` at `offset`, trusting the size fields.
    /// Returns `None` if the chunk does not fit.
    pub fn from_slice(data: &[u8], offset: usize) -> Option<Self> {
        let fields = ChunkFields::parse(data.get(offset..)?)?;
        let b64_start = offset + CHUNK_HEADER_LEN;
        let deflate_start = b64_start.checked_add(fields.base64_size as usize)?;
        let end = deflate_start.checked_add(fields.deflate_size as usize)?;
        if end > data.len() {
            return None;
        }
        Some(DataChunk::from_parts(
            fields,
            data[b64_start..deflate_start].to_vec(),
            data[deflate_start..end].to_vec(),
            offset as u64,
        ))
    }

    pub fn from_parts(
        fields: ChunkFields,
        base64_payload: Vec<u8>,
        deflate_payload: Vec<u8>,
        file_offset: u64,
    ) -> Self {
        DataChunk {
            crc32: fields.crc32,
            chunk_index: fields.chunk_index,
            base64_size: fields.base64_size,
            deflate_size: fields.deflate_size,
            record_count: fields.record_count,
            reserved: fields.reserved,
            base64_payload,
            deflate_payload,
            file_offset,
        }
    }

    pub fn fields(&self) -> ChunkFields {
        ChunkFields {
            crc32: self.crc32,
            chunk_index: self.chunk_index,
            base64_size: self.base64_size,
            deflate_size: self.deflate_size,
            record_count: self.record_count,
            reserved: self.reserved,
        }
    }

    pub fn encoded_len(&self) -> u64 {
        self.fields().encoded_len()
    }

    pub fn end_offset(&self) -> u64 {
        self.file_offset + self.encoded_len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len() as usize);
        out.extend_from_slice(&self.fields().to_bytes());
        out.extend_from_slice(&self.base64_payload);
        out.extend_from_slice(&self.deflate_payload);
        out
    }

    /// True when the Base64 section is empty or consists of alphabet
    /// characters followed by at most two `=` and has a length divisible by 4.
    pub fn base64_shape_ok(&self) -> bool {
        base64_shape_ok(&self.base64_payload)
    }

    /// Decoded Base64 section as an opaque blob.
    pub fn base64_decoded(&self) -> Option<Vec<u8>> {
        if !self.base64_shape_ok() {
            return None;
        }
        STANDARD.decode(&self.base64_payload).ok()
    }
}

pub(crate) fn base64_shape_ok(text: &[u8]) -> bool {
    if !text.len().is_multiple_of(4) {
        return false;
    }
    let body_len = text.iter().rposition(|&c| c != b'=').map_or(0, |p| p + 1);
    if text.len() - body_len > 2 {
        return false;
    }
    text[..body_len].iter().all(|&c| c.is_ascii_alphanumeric() || c == b'+' || c == b'/')
}
