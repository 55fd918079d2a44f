//! Forensic decoding of Windows telemetry ring-buffer store (RBS) files.
//!
//! The crate reads `UTCRBES3`/`5`/`7`/`8` images into telemetry records with
//! chunk-level provenance, recovers what it can from damaged or wrapped
//! files, carves RBS images out of raw disk data, extracts disk, application
//! and process artifacts, and builds sorted timelines.
//!
//! ```no_run
//! use rbs_forensics::reader;
//!
//! let out = reader::read_file("events10.rbs")?;
//! for rec in out.records() {
//!     println!("{} {}", rec.time.as_deref().unwrap_or("-"), rec.name);
//! }
//! # Ok::<(), rbs_forensics::reader::ReadError>(())
//! ```

pub mod carver;
pub mod catalog;
pub mod extract;
pub mod format;
pub mod reader;
pub mod timeline;
pub mod writer;

pub use catalog::{EventCatalog, EventCatalogEntry};
pub use format::{
    DataChunk, PropertyCategory, Provenance, RbsFileType, RbsHeader, RbsVersion, TelemetryRecord, TimelineEntry,
};
pub use reader::{read_bytes, read_file, ReadOptions, ReadOutput, ReadReport, Warning, WarningKind};
