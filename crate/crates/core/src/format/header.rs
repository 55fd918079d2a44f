use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{filetime_to_iso, RbsFileType, RbsVersion, SIGNATURE_PREFIX};

/// Header length for UTCRBES5 and later (includes the 11 reserved bytes).
pub const HEADER_LEN: usize = 0x35;
/// Header length assumed for UTCRBES3.
pub const HEADER_LEN_LEGACY: usize = 0x2A;
pub const MAX_HEADER_LEN: usize = HEADER_LEN;

const RESERVED_LEN: usize = HEADER_LEN - HEADER_LEN_LEGACY;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeaderError {
    #[error("unknown signature {found:02x?}")]
    UnknownSignature { found: Vec<u8> },
    #[error("invalid file type code 0x{0:04x}")]
    InvalidFileType(u16),
    #[error("truncated header: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
}

/// Non-fatal header anomalies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeaderIssue {
    /// The two copies of the last-chunk offset or index disagree. Observed on
    /// real systems when the service halted mid-write.
    CursorMismatch,
    /// A cursor offset points into the header or past the fixed file size.
    OffsetOutOfRange { field: String, value: u32 },
    /// The last-modified timestamp lies beyond year 9999.
    ImplausibleTimestamp,
}

/// Decoded fixed-layout file header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbsHeader {
    pub version: RbsVersion,
    /// FILETIME (100 ns ticks since 1601-01-01 UTC).
    pub last_modified: u64,
    pub last_chunk_offset_1: u32,
    pub last_chunk_offset_2: u32,
    pub last_chunk_size: u32,
    pub total_chunk_size: u32,
    pub last_chunk_index_1: u32,
    pub last_chunk_index_2: u32,
    pub file_type: RbsFileType,
    /// Present for UTCRBES5 and later.
    pub reserved: Option<[u8; RESERVED_LEN]>,
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

impl RbsHeader {
    /// A header describing a file with no chunks written yet.
    pub fn empty(version: RbsVersion, file_type: RbsFileType, last_modified: u64) -> Self {
        let start = version.header_len() as u32;
        RbsHeader {
            version,
            last_modified,
            last_chunk_offset_1: start,
            last_chunk_offset_2: start,
            last_chunk_size: 0,
            total_chunk_size: 0,
            last_chunk_index_1: 0,
            last_chunk_index_2: 0,
            file_type,
            reserved: (!version.is_legacy()).then_some([0u8; RESERVED_LEN]),
        }
    }

    /// Decodes a header from the first bytes of a file.
    pub fn parse(bytes: &[u8]) -> Result<Self, HeaderError> {
        let probe = bytes.len().min(8);
        let prefix_len = probe.min(SIGNATURE_PREFIX.len());
        if bytes[..prefix_len] != SIGNATURE_PREFIX[..prefix_len] {
            return Err(HeaderError::UnknownSignature { found: bytes[..probe].to_vec() });
        }
        if bytes.len() < 8 {
            return Err(HeaderError::Truncated { needed: HEADER_LEN_LEGACY, available: bytes.len() });
        }
        let version = RbsVersion::from_signature(&bytes[..8])
            .ok_or_else(|| HeaderError::UnknownSignature { found: bytes[..8].to_vec() })?;
        let needed = version.header_len();
        if bytes.len() < needed {
            return Err(HeaderError::Truncated { needed, available: bytes.len() });
        }
        let code = u16::from_le_bytes([bytes[0x28], bytes[0x29]]);
        let file_type = RbsFileType::from_code(code).ok_or(HeaderError::InvalidFileType(code))?;
        let reserved = if version.is_legacy() {
            None
        } else {
            let mut r = [0u8; RESERVED_LEN];
            r.copy_from_slice(&bytes[HEADER_LEN_LEGACY..HEADER_LEN]);
            Some(r)
        };
        Ok(RbsHeader {
            version,
            last_modified: u64::from_le_bytes(bytes[0x08..0x10].try_into().expect("8 bytes")),
            last_chunk_offset_1: le_u32(bytes, 0x10),
            last_chunk_offset_2: le_u32(bytes, 0x14),
            last_chunk_size: le_u32(bytes, 0x18),
            total_chunk_size: le_u32(bytes, 0x1C),
            last_chunk_index_1: le_u32(bytes, 0x20),
            last_chunk_index_2: le_u32(bytes, 0x24),
            file_type,
            reserved,
        })
    }

    /// Encoded length: 0x2A for V3, 0x35 otherwise.
    pub fn len(&self) -> usize {
        self.version.header_len()
    }

    pub fn is_empty(&self) -> bool {
        self.total_chunk_size == 0 && self.last_chunk_size == 0
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.version.signature());
        out.extend_from_slice(&self.last_modified.to_le_bytes());
        for v in [
            self.last_chunk_offset_1,
            self.last_chunk_offset_2,
            self.last_chunk_size,
            self.total_chunk_size,
            self.last_chunk_index_1,
            self.last_chunk_index_2,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.file_type.code().to_le_bytes());
        if !self.version.is_legacy() {
            out.extend_from_slice(&self.reserved.unwrap_or_default());
        }
        debug_assert_eq!(out.len(), self.len());
        out
    }

    /// Whether both cursor copies agree (healthy-file shape).
    pub fn cursor_consistent(&self) -> bool {
        self.last_chunk_offset_1 == self.last_chunk_offset_2 && self.last_chunk_index_1 == self.last_chunk_index_2
    }

    /// Byte positions just past the last written chunk, one per distinct
    /// cursor copy. In a wrapped file this is where stale data begins.
    /// Empty when the header records no written chunk.
    pub fn frontiers(&self) -> Vec<u64> {
        if self.last_chunk_size == 0 {
            return Vec::new();
        }
        let mut f: Vec<u64> = [self.last_chunk_offset_1, self.last_chunk_offset_2]
            .into_iter()
            .map(|o| o as u64 + self.last_chunk_size as u64)
            .collect();
        f.dedup();
        f
    }

    pub fn max_chunk_index(&self) -> u32 {
        self.last_chunk_index_1.max(self.last_chunk_index_2)
    }

    pub fn last_modified_iso(&self) -> String {
        filetime_to_iso(self.last_modified)
    }

    /// Fixed size under the default size era for this version.
    pub fn nominal_size(&self) -> u64 {
        self.version.nominal_size(self.file_type)
    }

    /// Checks the invariants a healthy header satisfies. `file_size` bounds
    /// the cursor offsets; pass the nominal size when the real size is unknown.
    pub fn issues(&self, file_size: u64) -> Vec<HeaderIssue> {
        let mut issues = Vec::new();
        if !self.cursor_consistent() {
            issues.push(HeaderIssue::CursorMismatch);
        }
        for (field, value) in
            [("last_chunk_offset_1", self.last_chunk_offset_1), ("last_chunk_offset_2", self.last_chunk_offset_2)]
        {
            if (value as usize) < self.len() || value as u64 >= file_size {
                issues.push(HeaderIssue::OffsetOutOfRange { field: field.to_string(), value });
            }
        }
        if !super::is_plausible_filetime(self.last_modified) {
            issues.push(HeaderIssue::ImplausibleTimestamp);
        }
        issues
    }
}
