use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use rbs_forensics::carver::{self, Confidence};
use rbs_forensics::catalog::{self, ExtractorId};
use rbs_forensics::extract::{self, BootRecordKind};
use rbs_forensics::format::{parse_record_time, PropertyCategory, RbsFileType, RbsHeader, RbsVersion, TelemetryRecord};
use rbs_forensics::reader::{self, ReadError, ReadOptions, ReadOutput};
use rbs_forensics::timeline::{self, ExportFormat, Filter};
use rbs_forensics::writer::{FixtureWriter, WriterConfig};

#[derive(Parser)]
#[command(name = "rbs", version, about = "Parse, verify, carve and interpret Windows telemetry RBS files")]
struct Args {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the file header.
    Info {
        path: PathBuf,
        /// Emit the header as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Check every chunk's CRC and payload.
    Verify {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// One JSON report per line instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Write decoded records to stdout as JSONL.
    Dump {
        path: PathBuf,
        /// Print each chunk's inflated payload text as stored.
        #[arg(long, conflicts_with = "records")]
        raw_json: bool,
        /// Records with a `_provenance` key (the default).
        #[arg(long)]
        records: bool,
    },
    /// Build one sorted timeline from any number of files.
    Timeline {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// jsonl or csv.
        #[arg(long, default_value = "jsonl")]
        format: String,
        /// Event-name glob, e.g. "Census.*".
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        category: Option<PropertyCategory>,
        /// Inclusive lower time bound (ISO-8601).
        #[arg(long)]
        from: Option<String>,
        /// Exclusive upper time bound (ISO-8601).
        #[arg(long)]
        to: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Carve embedded RBS files out of a raw image.
    Carve {
        image: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Read window in bytes.
        #[arg(long, default_value_t = carver::DEFAULT_WINDOW)]
        window: usize,
    },
    /// Write a synthetic RBS file from JSONL records.
    GenFixture {
        /// Signature revision: 3, 5, 7 or 8.
        #[arg(long, default_value = "8")]
        version: RbsVersion,
        /// File type name or code.
        #[arg(long = "type", default_value = "normal")]
        file_type: RbsFileType,
        /// Fixed file size in bytes (default: the size table).
        #[arg(long)]
        size: Option<u64>,
        /// JSONL file with one record per line; "-" reads stdin.
        #[arg(long)]
        records: PathBuf,
        /// Records per chunk (default: all records in one chunk).
        #[arg(long)]
        batch_size: Option<usize>,
        /// Keep appending chunks until the body has wrapped N times.
        #[arg(long, default_value_t = 0)]
        wrap: u32,
        /// Header FILETIME, for reproducible output.
        #[arg(long)]
        timestamp: Option<u64>,
        /// Random Base64 text per chunk, in characters.
        #[arg(long, default_value_t = 0)]
        base64_size: usize,
        #[arg(long, default_value_t = 0)]
        start_index: u32,
        /// Separate records with newlines.
        #[arg(long)]
        newlines: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write structured artifacts from catalogued events.
    Extract {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        boot_sectors: bool,
        #[arg(long)]
        disks: bool,
        #[arg(long)]
        apps: bool,
        #[arg(long)]
        processes: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Exit status: evidence problems are 1, tool failures 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Status {
    Ok = 0,
    Degraded = 1,
    Fatal = 2,
}

impl Status {
    fn of(output: &ReadOutput) -> Status {
        if output.report.is_clean() {
            Status::Ok
        } else {
            Status::Degraded
        }
    }
}

fn read_one(path: &Path, keep_text: bool) -> Result<ReadOutput, ReadError> {
    let data = fs::read(path)?;
    let options = ReadOptions { source: path.display().to_string(), keep_text };
    Ok(reader::read_bytes(&data, &options)?)
}

/// Reads files concurrently; results keep input order.
fn read_many(paths: &[PathBuf]) -> Vec<(&PathBuf, Result<ReadOutput, ReadError>)> {
    paths.par_iter().map(|p| (p, read_one(p, false))).collect()
}

fn report_warnings(path: &Path, output: &ReadOutput) {
    for w in &output.report.warnings {
        eprintln!("{}: {w}", path.display());
    }
}

fn print_header(header: &RbsHeader, out: &mut impl Write) -> io::Result<()> {
    let sig = String::from_utf8_lossy(&header.version.signature()).into_owned();
    writeln!(out, "signature            {sig} ({})", header.version.windows_builds())?;
    writeln!(
        out,
        "file type            0x{:02x} {} ({})",
        header.file_type.code(),
        header.file_type.name(),
        header.file_type.file_name(header.version)
    )?;
    writeln!(out, "last modified        {} (FILETIME {})", header.last_modified_iso(), header.last_modified)?;
    writeln!(out, "last chunk offset    0x{:x} / 0x{:x}", header.last_chunk_offset_1, header.last_chunk_offset_2)?;
    writeln!(out, "last chunk size      {}", header.last_chunk_size)?;
    writeln!(out, "total chunk size     {}", header.total_chunk_size)?;
    writeln!(out, "last chunk index     {} / {}", header.last_chunk_index_1, header.last_chunk_index_2)?;
    writeln!(out, "header length        0x{:x}", header.len())?;
    writeln!(out, "nominal file size    {}", header.nominal_size())
}

fn cmd_info(path: &Path, as_json: bool) -> Result<Status> {
    let data = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let header = reader::parse_header(&data).with_context(|| format!("{}", path.display()))?;
    let mut out = io::stdout().lock();
    if as_json {
        let mut v = serde_json::to_value(&header)?;
        v["signature"] = json!(String::from_utf8_lossy(&header.version.signature()));
        v["file_name"] = json!(header.file_type.file_name(header.version));
        v["last_modified_iso"] = json!(header.last_modified_iso());
        writeln!(out, "{v}")?;
    } else {
        print_header(&header, &mut out)?;
    }
    let issues = header.issues(data.len().max(header.len() + 1) as u64);
    for issue in &issues {
        eprintln!("{}: warning: {issue:?}", path.display());
    }
    Ok(if issues.is_empty() { Status::Ok } else { Status::Degraded })
}

fn cmd_verify(paths: &[PathBuf], as_json: bool) -> Result<Status> {
    let mut status = Status::Ok;
    let mut out = io::stdout().lock();
    for (path, result) in read_many(paths) {
        let output = match result {
            Ok(o) => o,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                status = Status::Fatal;
                continue;
            }
        };
        let r = &output.report;
        if as_json {
            let mut v = serde_json::to_value(r)?;
            v["path"] = json!(path.display().to_string());
            writeln!(out, "{v}")?;
        } else {
            writeln!(
                out,
                "{}: chunks ok {}, failed {}, records {}, crc mode {:?}, warnings {}",
                path.display(),
                r.chunks_ok,
                r.chunks_failed,
                r.records,
                r.crc_mode_observed,
                r.warnings.len()
            )?;
        }
        report_warnings(path, &output);
        status = status.max(Status::of(&output));
    }
    Ok(status)
}

fn cmd_dump(path: &Path, raw_json: bool) -> Result<Status> {
    let output = read_one(path, raw_json).with_context(|| format!("{}", path.display()))?;
    let mut out = BufWriter::new(io::stdout().lock());
    if raw_json {
        for chunk in &output.chunks {
            if let Some(text) = &chunk.text {
                writeln!(out, "{text}")?;
            }
        }
    } else {
        for rec in output.records() {
            serde_json::to_writer(&mut out, &rec.to_json_with_provenance())?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    report_warnings(path, &output);
    Ok(Status::of(&output))
}

#[allow(clippy::too_many_arguments)]
fn cmd_timeline(
    paths: &[PathBuf],
    format: &str,
    name: Option<&str>,
    category: Option<PropertyCategory>,
    from: Option<&str>,
    to: Option<&str>,
    output: Option<&Path>,
) -> Result<Status> {
    let format: ExportFormat = format.parse()?;
    let bound = |text: Option<&str>, flag: &str| {
        text.map(|t| parse_record_time(t).with_context(|| format!("{flag}: '{t}' is not an ISO-8601 time"))).transpose()
    };
    let mut filter = Filter::default().with_range(bound(from, "--from")?, bound(to, "--to")?);
    if let Some(n) = name {
        filter = filter.with_name(n)?;
    }
    filter.category = category;

    let mut status = Status::Ok;
    let mut sources = Vec::new();
    for (path, result) in read_many(paths) {
        match result {
            Ok(o) => {
                report_warnings(path, &o);
                status = status.max(Status::of(&o));
                let (records, _) = o.into_parts();
                let entries: Vec<_> = records.into_par_iter().map(timeline::normalize_owned).collect();
                sources.push(entries);
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                status = Status::Fatal;
            }
        }
    }
    let merged = timeline::merge_sort(sources);
    match output {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            timeline::export(&merged, format, &filter, f)?;
        }
        None => timeline::export(&merged, format, &filter, io::stdout().lock())?,
    }
    Ok(status)
}

fn cmd_carve(image: &Path, out_dir: &Path, window: usize) -> Result<Status> {
    let mut src = File::open(image).with_context(|| format!("opening {}", image.display()))?;
    let hits = carver::scan(&mut src, window).with_context(|| format!("scanning {}", image.display()))?;
    fs::create_dir_all(out_dir)?;
    let mut manifest = BufWriter::new(File::create(out_dir.join("manifest.jsonl"))?);
    let mut status = Status::Ok;
    for hit in &hits {
        let carved = carver::extract(&mut src, hit)?;
        let name = hit.file_name();
        fs::write(out_dir.join(&name), &carved.bytes)?;
        for w in carved.warnings.iter().chain(&hit.notes) {
            eprintln!("{}: offset {}: {w}", image.display(), hit.offset);
        }
        if hit.confidence == Confidence::Low || carved.padded > 0 {
            status = Status::Degraded;
        }
        let line = json!({
            "offset": hit.offset,
            "version": hit.version,
            "file_type": hit.file_type,
            "carved_size": hit.carved_size,
            "confidence": hit.confidence,
            "file": name,
            "sha256": hex::encode(Sha256::digest(&carved.bytes)),
            "padded": carved.padded,
            "notes": hit.notes,
        });
        writeln!(manifest, "{line}")?;
    }
    manifest.flush()?;
    println!("{} hit(s) in {}", hits.len(), image.display());
    Ok(status)
}

fn load_records(path: &Path) -> Result<Vec<Value>> {
    let input: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(BufReader::new(io::stdin()))
    } else {
        Box::new(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
    };
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        if TelemetryRecord::from_json(v.clone()).is_err() {
            bail!("{}:{}: not a telemetry record (object with a string 'name')", path.display(), i + 1);
        }
        records.push(v);
    }
    if records.is_empty() {
        bail!("{}: no records", path.display());
    }
    Ok(records)
}

struct FixtureArgs {
    config: WriterConfig,
    records: PathBuf,
    batch_size: Option<usize>,
    wrap: u32,
    output: PathBuf,
}

fn cmd_gen_fixture(a: FixtureArgs) -> Result<Status> {
    let records = load_records(&a.records)?;
    let batch = a.batch_size.unwrap_or(records.len()).max(1);
    let batches: Vec<&[Value]> = records.chunks(batch).collect();
    let mut writer = FixtureWriter::new(a.config)?;
    for b in &batches {
        writer.append(b)?;
    }
    let mut wraps = writer.placements().iter().filter(|p| p.wrapped).count() as u32;
    let mut next = 0;
    while wraps < a.wrap {
        if writer.append(batches[next % batches.len()])?.wrapped {
            wraps += 1;
        }
        next += 1;
    }
    let chunks = writer.placements().len();
    let image = writer.finish();
    fs::write(&a.output, &image).with_context(|| format!("writing {}", a.output.display()))?;
    eprintln!("wrote {} ({} bytes, {chunks} chunks)", a.output.display(), image.len());
    Ok(Status::Ok)
}

fn file_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn with_provenance(mut v: Value, rec: &TelemetryRecord) -> Result<Value> {
    v["_provenance"] = serde_json::to_value(&rec.provenance)?;
    Ok(v)
}

struct Selection {
    boot: bool,
    disks: bool,
    apps: bool,
    processes: bool,
}

fn cmd_extract(paths: &[PathBuf], sel: Selection, out_dir: &Path) -> Result<Status> {
    fs::create_dir_all(out_dir)?;
    let open = |name: &str, on: bool| -> Result<Option<BufWriter<File>>> {
        Ok(if on { Some(BufWriter::new(File::create(out_dir.join(name))?)) } else { None })
    };
    let mut disks = open("disks.jsonl", sel.disks)?;
    let mut apps = open("apps.jsonl", sel.apps)?;
    let mut procs = open("processes.jsonl", sel.processes)?;
    let mut status = Status::Ok;
    let mut unnamed = 0usize;
    for (path, result) in read_many(paths) {
        let output = match result {
            Ok(o) => o,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                status = Status::Fatal;
                continue;
            }
        };
        report_warnings(path, &output);
        status = status.max(Status::of(&output));
        for rec in output.records() {
            let Some(id) = catalog::builtin().lookup(&rec.name).and_then(|e| e.extractor) else {
                continue;
            };
            let at = format!(
                "{} chunk {} record {}",
                path.display(),
                rec.provenance.chunk_index,
                rec.provenance.record_index
            );
            match id {
                ExtractorId::DiskInventory => {
                    if let Some(out) = disks.as_mut() {
                        match extract::extract_disk_inventory(rec) {
                            Ok(d) => writeln!(out, "{}", with_provenance(serde_json::to_value(&d)?, rec)?)?,
                            Err(e) => eprintln!("{at}: {e}"),
                        }
                    }
                }
                ExtractorId::AppLifecycle => {
                    if let Some(out) = apps.as_mut() {
                        match extract::extract_app_lifecycle(rec) {
                            Ok(a) => writeln!(out, "{}", with_provenance(serde_json::to_value(&a)?, rec)?)?,
                            Err(e) => eprintln!("{at}: {e}"),
                        }
                    }
                }
                ExtractorId::ProcessExecution => {
                    if let Some(out) = procs.as_mut() {
                        match extract::extract_process_execution(rec) {
                            Ok(p) => writeln!(out, "{}", with_provenance(serde_json::to_value(&p)?, rec)?)?,
                            Err(e) => eprintln!("{at}: {e}"),
                        }
                    }
                }
                ExtractorId::BootSector if sel.boot => {
                    match extract::extract_boot_sector(rec, extract::DEFAULT_BOOT_SECTOR_FIELDS) {
                        Ok(blob) => {
                            let prefix = match blob.kind {
                                BootRecordKind::Mbr => "mbr",
                                BootRecordKind::Gpt => "gpt",
                            };
                            let disk = blob.disk_id.as_deref().map(file_safe).unwrap_or_else(|| {
                                unnamed += 1;
                                format!("unknown{unnamed}")
                            });
                            let file = out_dir.join(format!("{prefix}_{disk}.bin"));
                            fs::write(&file, &blob.raw_bytes)?;
                            if blob.signature_missing {
                                eprintln!("{at}: {} has no boot signature", file.display());
                            }
                        }
                        Err(e) => eprintln!("{at}: {e}"),
                    }
                }
                ExtractorId::BootSector => {}
            }
        }
    }
    for out in [disks.as_mut(), apps.as_mut(), procs.as_mut()].into_iter().flatten() {
        out.flush()?;
    }
    Ok(status)
}

fn run(args: Args) -> Result<Status> {
    match args.cmd {
        Command::Info { path, json } => cmd_info(&path, json),
        Command::Verify { paths, json } => cmd_verify(&paths, json),
        Command::Dump { path, raw_json, records: _ } => cmd_dump(&path, raw_json),
        Command::Timeline { paths, format, name, category, from, to, output } => {
            cmd_timeline(&paths, &format, name.as_deref(), category, from.as_deref(), to.as_deref(), output.as_deref())
        }
        Command::Carve { image, out_dir, window } => cmd_carve(&image, &out_dir, window),
        Command::GenFixture {
            version,
            file_type,
            size,
            records,
            batch_size,
            wrap,
            timestamp,
            base64_size,
            start_index,
            newlines,
            seed,
            output,
        } => {
            let mut config = WriterConfig::new(version, file_type);
            config.fixed_size_override = size;
            config.timestamp = timestamp;
            config.base64_blob_size = base64_size;
            config.start_chunk_index = start_index;
            config.newline_separated = newlines;
            config.seed = seed;
            cmd_gen_fixture(FixtureArgs { config, records, batch_size, wrap, output })
        }
        Command::Extract { paths, boot_sectors, disks, apps, processes, out_dir } => {
            let all = !(boot_sectors || disks || apps || processes);
            let sel = Selection {
                boot: boot_sectors || all,
                disks: disks || all,
                apps: apps || all,
                processes: processes || all,
            };
            cmd_extract(&paths, sel, &out_dir)
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Fatal as u8)
        }
    }
}
