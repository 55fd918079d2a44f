//! Event-name catalog: which forensic property a telemetry `name` carries and
//! which RBS file type it is expected in.
//!
//! The built-in table is compiled in and mirrored by `catalog/events.tsv`,
//! the human-editable copy shipped with the crate. [`EventCatalog::from_tsv`]
//! loads user-extended copies.
//!
//! TSV format: one entry per line, tab-separated columns
//! `name`, `category`, `source` (file type code `0x00`..`0x03`),
//! `extractor` (or `-`), `notes` (may be empty). Lines starting with `#` and
//! blank lines are ignored. Names match exactly and case-sensitively.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::{parse_record_time, PropertyCategory, RbsFileType, TelemetryRecord};

/// Structured extractor handling a catalogued event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorId {
    DiskInventory,
    AppLifecycle,
    ProcessExecution,
    BootSector,
}

impl ExtractorId {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractorId::DiskInventory => "disk_inventory",
            ExtractorId::AppLifecycle => "app_lifecycle",
            ExtractorId::ProcessExecution => "process_execution",
            ExtractorId::BootSector => "boot_sector",
        }
    }
}

impl fmt::Display for ExtractorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExtractorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [ExtractorId::DiskInventory, ExtractorId::AppLifecycle, ExtractorId::ProcessExecution, ExtractorId::BootSector]
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown extractor '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCatalogEntry {
    pub name: String,
    pub category: PropertyCategory,
    pub expected_source: RbsFileType,
    pub extractor: Option<ExtractorId>,
    pub notes: String,
}

use ExtractorId::{AppLifecycle, BootSector, DiskInventory};
use PropertyCategory::*;
use RbsFileType::*;

type Row = (&'static str, PropertyCategory, RbsFileType, Option<ExtractorId>, &'static str);

const BUILTIN: &[Row] = &[
    ("Census.OS", OsAppLifecycle, Realtime, None, ""),
    (
        "Microsoft.Windows.Inventory.Core.InventoryApplicationAdd",
        OsAppLifecycle,
        NormalCritical,
        Some(AppLifecycle),
        "",
    ),
    (
        "Microsoft.Windows.Inventory.Core.InventoryApplicationRemove",
        OsAppLifecycle,
        NormalCritical,
        Some(AppLifecycle),
        "",
    ),
    (
        "Microsoft.Windows.Kernel.Power.OSStateChange",
        OsAppLifecycle,
        NormalCritical,
        None,
        "also listed under BootSectorPartition (boot timestamps)",
    ),
    ("Census.Hardware", OsAppLifecycle, Realtime, None, ""),
    ("Census.Storage", OsAppLifecycle, Realtime, None, ""),
    ("Census.Memory", OsAppLifecycle, Realtime, None, ""),
    ("Census.Processor", OsAppLifecycle, Realtime, None, ""),
    (
        "Microsoft.Windows.Inventory.General.InventoryMiscellaneousPhysicalDiskInfoAdd",
        HardwareDevice,
        NormalCritical,
        Some(DiskInventory),
        "",
    ),
    ("Microsoft.Windows.Inventory.Core.InventoryDevicePnpAdd", HardwareDevice, NormalCritical, None, ""),
    ("Microsoft.Windows.Inventory.Core.InventoryDevicePnpRemove", HardwareDevice, NormalCritical, None, ""),
    ("Microsoft.Windows.Inventory.Core.InventoryDeviceContainerAdd", HardwareDevice, NormalCritical, None, ""),
    ("Microsoft.Windows.Inventory.Core.InventoryDeviceContainerRemove", HardwareDevice, NormalCritical, None, ""),
    ("Microsoft.Windows.Inventory.Core.InventoryDriverPackageAdd", HardwareDevice, NormalCritical, None, ""),
    (
        "Win32kTraceLogging.AppInteractivitySummary",
        ProcessExecution,
        NormalCritical,
        Some(ExtractorId::ProcessExecution),
        "",
    ),
    ("Win32kTraceLogging.PostUpdateUseInfo", ProcessExecution, NormalCritical, Some(ExtractorId::ProcessExecution), ""),
    (
        "Microsoft.Windows.Narrator.Asimov.NarratorCommandGeneratedStart",
        ProcessExecution,
        NormalCritical,
        Some(ExtractorId::ProcessExecution),
        "",
    ),
    (
        "Microsoft.Windows.HangReporting.AppHangEvent",
        ProcessExecution,
        NormalCritical,
        Some(ExtractorId::ProcessExecution),
        "",
    ),
    (
        "Microsoft.OneDrive.Sync.Updater.ComponentInstallState",
        ProcessExecution,
        NormalCritical,
        Some(ExtractorId::ProcessExecution),
        "",
    ),
    ("Microsoft.Windows.Skype.Host.UserLoggedIn", ProcessExecution, Normal, Some(ExtractorId::ProcessExecution), ""),
    ("Microsoft-Windows-Store.StoreLaunching", ProcessExecution, Normal, Some(ExtractorId::ProcessExecution), ""),
    (
        "Microsoft.Windows.Inventory.General.InventoryMiscellaneousMbrDiskAdd",
        BootSectorPartition,
        NormalCritical,
        Some(BootSector),
        "",
    ),
    (
        "Microsoft.Windows.Inventory.General.InventoryMiscellaneousGptDiskAdd",
        BootSectorPartition,
        NormalCritical,
        Some(BootSector),
        "",
    ),
];

/// Text of the shipped catalog file.
pub const SHIPPED_TSV: &str = include_str!("../catalog/events.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("line {line}: expected 5 tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: {message}")]
    BadField { line: usize, message: String },
    #[error("line {line}: duplicate name '{name}'")]
    DuplicateName { line: usize, name: String },
}

/// Exact-match catalog keyed by event name.
#[derive(Debug, Clone, Default)]
pub struct EventCatalog {
    entries: Vec<EventCatalogEntry>,
    by_name: HashMap<String, usize>,
}

static BUILTIN_CATALOG: OnceLock<EventCatalog> = OnceLock::new();

/// The compiled-in catalog.
pub fn builtin() -> &'static EventCatalog {
    BUILTIN_CATALOG.get_or_init(|| {
        let entries = BUILTIN
            .iter()
            .map(|&(name, category, expected_source, extractor, notes)| EventCatalogEntry {
                name: name.to_string(),
                category,
                expected_source,
                extractor,
                notes: notes.to_string(),
            })
            .collect();
        EventCatalog::from_entries(entries).expect("built-in catalog has unique names")
    })
}

impl EventCatalog {
    pub fn from_entries(entries: Vec<EventCatalogEntry>) -> Result<Self, CatalogError> {
        let mut by_name = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if by_name.insert(e.name.clone(), i).is_some() {
                return Err(CatalogError::DuplicateName { line: i + 1, name: e.name.clone() });
            }
        }
        Ok(EventCatalog { entries, by_name })
    }

    pub fn from_tsv(text: &str) -> Result<Self, CatalogError> {
        let mut entries = Vec::new();
        let mut seen = HashMap::new();
        for (no, line) in text.lines().enumerate() {
            let line_no = no + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(CatalogError::ColumnCount { line: line_no, found: cols.len() });
            }
            let bad = |message: String| CatalogError::BadField { line: line_no, message };
            let name = cols[0].trim();
            if name.is_empty() {
                return Err(bad("empty name".into()));
            }
            let category = cols[1].parse::<PropertyCategory>().map_err(bad)?;
            let expected_source = cols[2].parse::<RbsFileType>().map_err(bad)?;
            let extractor = match cols[3].trim() {
                "-" | "" => None,
                id => Some(id.parse::<ExtractorId>().map_err(bad)?),
            };
            if seen.insert(name.to_string(), line_no).is_some() {
                return Err(CatalogError::DuplicateName { line: line_no, name: name.to_string() });
            }
            entries.push(EventCatalogEntry {
                name: name.to_string(),
                category,
                expected_source,
                extractor,
                notes: cols[4].to_string(),
            });
        }
        EventCatalog::from_entries(entries)
    }

    /// Serializes to the shipped TSV format.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# name\tcategory\tsource\textractor\tnotes\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t0x{:02x}\t{}\t{}\n",
                e.name,
                e.category,
                e.expected_source.code(),
                e.extractor.map_or("-", ExtractorId::as_str),
                e.notes
            ));
        }
        out
    }

    /// Adds or replaces entries from another catalog.
    pub fn extend(&mut self, other: &EventCatalog) {
        for e in &other.entries {
            match self.by_name.get(&e.name) {
                Some(&i) => self.entries[i] = e.clone(),
                None => {
                    self.by_name.insert(e.name.clone(), self.entries.len());
                    self.entries.push(e.clone());
                }
            }
        }
    }

    pub fn lookup(&self, name: &str) -> Option<&EventCatalogEntry> {
        self.by_name.get(name).map(|&i| &self.entries[i])
    }

    pub fn category(&self, name: &str) -> PropertyCategory {
        self.lookup(name).map_or(PropertyCategory::Unclassified, |e| e.category)
    }

    pub fn entries(&self) -> &[EventCatalogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Aggregate over all records sharing one event name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NameStats {
    pub count: u64,
    /// Earliest and latest parseable `time` values.
    pub first_seen: Option<DateTime<Utc>>,
    pub last_seen: Option<DateTime<Utc>>,
    pub observed_sources: BTreeSet<RbsFileType>,
    pub catalogued: bool,
    pub expected_source: Option<RbsFileType>,
    /// Some record was found in a file type other than `expected_source`.
    pub source_mismatch: bool,
}

/// Per-name statistics over a decoded corpus.
pub fn corpus_stats<'a>(
    catalog: &EventCatalog,
    records: impl IntoIterator<Item = &'a TelemetryRecord>,
) -> BTreeMap<String, NameStats> {
    let mut stats: BTreeMap<String, NameStats> = BTreeMap::new();
    for rec in records {
        let entry = catalog.lookup(&rec.name);
        let s = stats.entry(rec.name.clone()).or_insert_with(|| NameStats {
            count: 0,
            first_seen: None,
            last_seen: None,
            observed_sources: BTreeSet::new(),
            catalogued: entry.is_some(),
            expected_source: entry.map(|e| e.expected_source),
            source_mismatch: false,
        });
        s.count += 1;
        let source = rec.provenance.file_type;
        s.observed_sources.insert(source);
        if s.expected_source.is_some_and(|exp| exp != source) {
            s.source_mismatch = true;
        }
        if let Some(t) = rec.time.as_deref().and_then(parse_record_time) {
            s.first_seen = Some(s.first_seen.map_or(t, |f| f.min(t)));
            s.last_seen = Some(s.last_seen.map_or(t, |l| l.max(t)));
        }
    }
    stats
}
