//! Domain types and byte-level layout of RBS files.
//!
//! Nothing in this module performs I/O. The reader, writer and carver build on
//! the layout constants and encode/decode helpers defined here.
//!
//! Layout summary (all integers little-endian):
//!
//! ```text
//! file header (0x35 bytes for UTCRBES5/7/8, 0x2A bytes for UTCRBES3)
//!   0x00  8  signature "UTCRBES" + version digit
//!   0x08  8  FILETIME of last modification
//!   0x10  4  offset of last written chunk (copy 1)
//!   0x14  4  offset of last written chunk (copy 2)
//!   0x18  4  size of last written chunk
//!   0x1C  4  total size of chunks
//!   0x20  4  index of last written chunk (copy 1)
//!   0x24  4  index of last written chunk (copy 2)
//!   0x28  2  file type code
//!   0x2A 11  reserved (UTCRBES5 and later only)
//!
//! data chunk
//!   0x00  4  CRC-32
//!   0x04  4  chunk index
//!   0x08  4  Base64 section size
//!   0x0C  4  DEFLATE section size
//!   0x10  4  record count
//!   0x14  2  reserved
//!   0x16  .. Base64 section, then DEFLATE section
//! ```
//!
//! The V3 header length is an assumption: the 11 reserved bytes are only
//! documented for 1607 and later builds, so legacy headers are treated as
//! ending at 0x2A.

mod chunk;
mod entry;
mod header;
mod record;
mod time;

pub use chunk::{ChunkFields, DataChunk, CHUNK_HEADER_LEN};
pub use entry::{EntryFlag, TimelineEntry};
pub use header::{HeaderError, HeaderIssue, RbsHeader, HEADER_LEN, HEADER_LEN_LEGACY, MAX_HEADER_LEN};
pub(crate) use record::ParsedRecord;
pub use record::{Provenance, RecordError, TelemetryRecord};
pub use time::{
    datetime_to_filetime, filetime_to_datetime, filetime_to_iso, filetime_year, format_utc, is_plausible_filetime,
    parse_record_time, FILETIME_UNIX_EPOCH,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog;

/// ASCII prefix shared by every RBS signature.
pub const SIGNATURE_PREFIX: &[u8; 7] = b"UTCRBES";

/// Signature revision of an RBS file, taken from the digit following `UTCRBES`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RbsVersion {
    /// Windows 10 1507 and 1511 (also Windows 7/8.1 with the telemetry update).
    V3,
    /// Windows 10 1607.
    V5,
    /// Windows 10 1703.
    V7,
    /// Windows 10 1709, 1803 and later.
    V8,
}

impl RbsVersion {
    pub const ALL: [RbsVersion; 4] = [RbsVersion::V3, RbsVersion::V5, RbsVersion::V7, RbsVersion::V8];

    pub fn digit(self) -> u8 {
        match self {
            RbsVersion::V3 => b'3',
            RbsVersion::V5 => b'5',
            RbsVersion::V7 => b'7',
            RbsVersion::V8 => b'8',
        }
    }

    pub fn from_digit(digit: u8) -> Option<Self> {
        match digit {
            b'3' => Some(RbsVersion::V3),
            b'5' => Some(RbsVersion::V5),
            b'7' => Some(RbsVersion::V7),
            b'8' => Some(RbsVersion::V8),
            _ => None,
        }
    }

    /// The full 8-byte signature, e.g. `UTCRBES8`.
    pub fn signature(self) -> [u8; 8] {
        let mut sig = [0u8; 8];
        sig[..7].copy_from_slice(SIGNATURE_PREFIX);
        sig[7] = self.digit();
        sig
    }

    /// Decodes an 8-byte signature. Returns `None` unless the prefix matches
    /// and the digit is one of the published revisions.
    pub fn from_signature(sig: &[u8]) -> Option<Self> {
        if sig.len() < 8 || &sig[..7] != SIGNATURE_PREFIX {
            return None;
        }
        Self::from_digit(sig[7])
    }

    /// Legacy revisions use the `eventsNN.rbs` naming and size scheme.
    pub fn is_legacy(self) -> bool {
        self == RbsVersion::V3
    }

    pub fn header_len(self) -> usize {
        if self.is_legacy() {
            HEADER_LEN_LEGACY
        } else {
            HEADER_LEN
        }
    }

    /// Size eras that share this signature. V3 files cannot tell 1507 from 1511.
    pub fn size_eras(self) -> &'static [SizeEra] {
        if self.is_legacy() {
            &[SizeEra::Win1507, SizeEra::Win1511]
        } else {
            &[SizeEra::Modern]
        }
    }

    /// The era used when only the signature is known. For V3 this is the
    /// larger 1511 grid, so a carve never cuts off live chunks.
    pub fn default_era(self) -> SizeEra {
        if self.is_legacy() {
            SizeEra::Win1511
        } else {
            SizeEra::Modern
        }
    }

    /// Fixed file size for this revision and type under [`Self::default_era`].
    pub fn nominal_size(self, file_type: RbsFileType) -> u64 {
        fixed_size_bytes(self.default_era(), file_type)
    }

    pub fn windows_builds(self) -> &'static str {
        match self {
            RbsVersion::V3 => "1507, 1511",
            RbsVersion::V5 => "1607",
            RbsVersion::V7 => "1703",
            RbsVersion::V8 => "1709, 1803+",
        }
    }
}

impl fmt::Display for RbsVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sig = self.signature();
        // signature bytes are ASCII
        f.write_str(std::str::from_utf8(&sig).unwrap_or("UTCRBES?"))
    }
}

impl FromStr for RbsVersion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        let digit = match trimmed.as_bytes() {
            [d] => *d,
            [b'v' | b'V', d] => *d,
            bytes if bytes.len() == 8 && bytes.starts_with(SIGNATURE_PREFIX) => bytes[7],
            _ => return Err(format!("unknown RBS version '{s}'")),
        };
        RbsVersion::from_digit(digit).ok_or_else(|| format!("unknown RBS version '{s}'"))
    }
}

/// File type code stored at header offset 0x28.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RbsFileType {
    #[default]
    Normal,
    NormalCritical,
    CostDeferred,
    Realtime,
}

impl RbsFileType {
    pub const ALL: [RbsFileType; 4] =
        [RbsFileType::Normal, RbsFileType::NormalCritical, RbsFileType::CostDeferred, RbsFileType::Realtime];

    pub fn code(self) -> u16 {
        match self {
            RbsFileType::Normal => 0x00,
            RbsFileType::NormalCritical => 0x01,
            RbsFileType::CostDeferred => 0x02,
            RbsFileType::Realtime => 0x03,
        }
    }

    pub fn from_code(code: u16) -> Option<Self> {
        match code {
            0x00 => Some(RbsFileType::Normal),
            0x01 => Some(RbsFileType::NormalCritical),
            0x02 => Some(RbsFileType::CostDeferred),
            0x03 => Some(RbsFileType::Realtime),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RbsFileType::Normal => "Normal",
            RbsFileType::NormalCritical => "NormalCritical",
            RbsFileType::CostDeferred => "CostDeferred",
            RbsFileType::Realtime => "Realtime",
        }
    }

    /// Canonical on-disk file name. Legacy names do not follow code order:
    /// type 0x02 lives in `events11.rbs` and type 0x03 in `events10.rbs`.
    pub fn file_name(self, version: RbsVersion) -> &'static str {
        if version.is_legacy() {
            match self {
                RbsFileType::Normal => "events00.rbs",
                RbsFileType::NormalCritical => "events01.rbs",
                RbsFileType::CostDeferred => "events11.rbs",
                RbsFileType::Realtime => "events10.rbs",
            }
        } else {
            match self {
                RbsFileType::Normal => "Events_Normal.rbs",
                RbsFileType::NormalCritical => "Events_NormalCritical.rbs",
                RbsFileType::CostDeferred => "Events_CostDeferred.rbs",
                RbsFileType::Realtime => "Events_Realtime.rbs",
            }
        }
    }
}

impl fmt::Display for RbsFileType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RbsFileType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
            return u16::from_str_radix(hex, 16)
                .ok()
                .and_then(RbsFileType::from_code)
                .ok_or_else(|| format!("unknown file type '{s}'"));
        }
        if let Ok(code) = t.parse::<u16>() {
            return RbsFileType::from_code(code).ok_or_else(|| format!("unknown file type '{s}'"));
        }
        RbsFileType::ALL
            .into_iter()
            .find(|ty| ty.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| format!("unknown file type '{s}'"))
    }
}

/// Windows release grouping that determines the fixed RBS file sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SizeEra {
    Win1507,
    Win1511,
    /// 1607 and later.
    Modern,
}

// KiB per file type code (0x00..=0x03).
const SIZES_1507_KIB: [u64; 4] = [24_576, 6_226, 1_475, 492];
const SIZES_1511_KIB: [u64; 4] = [49_152, 12_452, 2_950, 984];
const SIZES_MODERN_KIB: [u64; 4] = [16_384, 6_554, 6_554, 3_277];

/// Fixed file size in bytes for a size era and file type.
pub fn fixed_size_bytes(era: SizeEra, file_type: RbsFileType) -> u64 {
    let grid = match era {
        SizeEra::Win1507 => &SIZES_1507_KIB,
        SizeEra::Win1511 => &SIZES_1511_KIB,
        SizeEra::Modern => &SIZES_MODERN_KIB,
    };
    grid[file_type.code() as usize] * 1024
}

/// Largest fixed size of any known RBS file.
pub fn max_fixed_size() -> u64 {
    SIZES_1511_KIB.iter().chain(&SIZES_MODERN_KIB).copied().max().unwrap_or(0) * 1024
}

/// Forensic property a telemetry event name belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PropertyCategory {
    OsAppLifecycle,
    HardwareDevice,
    ProcessExecution,
    BootSectorPartition,
    Unclassified,
}

impl PropertyCategory {
    pub const ALL: [PropertyCategory; 5] = [
        PropertyCategory::OsAppLifecycle,
        PropertyCategory::HardwareDevice,
        PropertyCategory::ProcessExecution,
        PropertyCategory::BootSectorPartition,
        PropertyCategory::Unclassified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PropertyCategory::OsAppLifecycle => "OsAppLifecycle",
            PropertyCategory::HardwareDevice => "HardwareDevice",
            PropertyCategory::ProcessExecution => "ProcessExecution",
            PropertyCategory::BootSectorPartition => "BootSectorPartition",
            PropertyCategory::Unclassified => "Unclassified",
        }
    }
}

impl fmt::Display for PropertyCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PropertyCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PropertyCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown property category '{s}'"))
    }
}

/// Category of an event name according to the built-in catalog.
pub fn classify(name: &str) -> PropertyCategory {
    catalog::builtin().lookup(name).map(|e| e.category).unwrap_or(PropertyCategory::Unclassified)
}

/// The file type a catalogued event is expected to be stored in.
pub fn expected_source(name: &str) -> Option<RbsFileType> {
    catalog::builtin().lookup(name).map(|e| e.expected_source)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signature_round_trip() {
        for v in RbsVersion::ALL {
            assert_eq!(RbsVersion::from_signature(&v.signature()), Some(v));
        }
        assert_eq!(&RbsVersion::V8.signature(), b"UTCRBES8");
        assert_eq!(RbsVersion::from_signature(b"UTCRBES4"), None);
        assert_eq!(RbsVersion::from_signature(b"UTCRBE"), None);
    }

    #[test]
    fn legacy_names_follow_type_column() {
        assert_eq!(RbsFileType::CostDeferred.file_name(RbsVersion::V3), "events11.rbs");
        assert_eq!(RbsFileType::Realtime.file_name(RbsVersion::V3), "events10.rbs");
        assert_eq!(RbsFileType::Realtime.file_name(RbsVersion::V7), "Events_Realtime.rbs");
    }

    #[test]
    fn sizes() {
        assert_eq!(fixed_size_bytes(SizeEra::Modern, RbsFileType::Normal), 16_384 * 1024);
        assert_eq!(fixed_size_bytes(SizeEra::Win1507, RbsFileType::Realtime), 492 * 1024);
        for ty in RbsFileType::ALL {
            assert_eq!(fixed_size_bytes(SizeEra::Win1511, ty), 2 * fixed_size_bytes(SizeEra::Win1507, ty));
        }
        assert_eq!(RbsVersion::V3.nominal_size(RbsFileType::Realtime), 984 * 1024);
        assert_eq!(max_fixed_size(), 49_152 * 1024);
    }

    #[test]
    fn parse_names() {
        assert_eq!("UTCRBES7".parse::<RbsVersion>().unwrap(), RbsVersion::V7);
        assert_eq!("v5".parse::<RbsVersion>().unwrap(), RbsVersion::V5);
        assert!("9".parse::<RbsVersion>().is_err());
        assert_eq!("0x03".parse::<RbsFileType>().unwrap(), RbsFileType::Realtime);
        assert_eq!("normalcritical".parse::<RbsFileType>().unwrap(), RbsFileType::NormalCritical);
        assert!("4".parse::<RbsFileType>().is_err());
        assert_eq!("processexecution".parse::<PropertyCategory>().unwrap(), PropertyCategory::ProcessExecution);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify("Census.OS"), PropertyCategory::OsAppLifecycle);
        assert_eq!(classify("Win32kTraceLogging.AppInteractivitySummary"), PropertyCategory::ProcessExecution);
        assert_eq!(classify("Com.Example.NotInCatalog"), PropertyCategory::Unclassified);
        assert_eq!(classify("census.os"), PropertyCategory::Unclassified);
        assert_eq!(expected_source("Census.Storage"), Some(RbsFileType::Realtime));
        assert_eq!(
            expected_source("Microsoft.Windows.Inventory.Core.InventoryApplicationAdd"),
            Some(RbsFileType::NormalCritical)
        );
        assert_eq!(expected_source("Unknown.Event"), None);
    }
}
