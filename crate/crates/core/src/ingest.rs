//! Streaming CDR ingestion.
//!
//! Records are parsed file by file and spilled to disk, partitioned by a
//! hash of the user id. Each partition is then folded into per-user hourly
//! cell counts, so memory grows with the number of distinct user-hours in
//! one partition rather than with the number of records.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::calendar::{civil_day_hour, Day};
use crate::error::{Error, Result};
use crate::io;
use crate::location::{self, DailySeries};
use crate::network::{CellId, LocationNetwork};

/// Env var overriding where spill partitions are written.
pub const SPILL_DIR_ENV: &str = "CDRMIG_SPILL_DIR";

pub const DEFAULT_MAX_RECORDS_PER_DAY: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub utc_offset_secs: i32,
    pub partitions: usize,
    pub max_avg_records_per_day: f64,
    pub spill_dir: Option<PathBuf>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            utc_offset_secs: 0,
            partitions: 64,
            max_avg_records_per_day: DEFAULT_MAX_RECORDS_PER_DAY,
            spill_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CdrRecord<'a> {
    pub user_id: &'a str,
    pub timestamp: i64,
    pub tower_id: &'a str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineError {
    Malformed,
}

/// Parses one `user_id,timestamp,tower_id` line.
pub fn parse_line(line: &str) -> std::result::Result<CdrRecord<'_>, LineError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let mut it = line.split(',');
    let (Some(user), Some(ts), Some(tower), None) = (it.next(), it.next(), it.next(), it.next())
    else {
        return Err(LineError::Malformed);
    };
    let user = user.trim();
    let tower = tower.trim();
    if user.is_empty() || tower.is_empty() || user.len() > u16::MAX as usize {
        return Err(LineError::Malformed);
    }
    let timestamp = ts.trim().parse().map_err(|_| LineError::Malformed)?;
    Ok(CdrRecord {
        user_id: user,
        timestamp,
        tower_id: tower,
    })
}

/// Stage counters. `users_in` counts every user with at least one usable
/// record; `bots` of them were removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub files: u64,
    pub lines: u64,
    pub records: u64,
    pub malformed: u64,
    pub unknown_tower: u64,
    pub users_in: u64,
    pub bots: u64,
    /// Largest number of (user, hour, cell) counters held at once by one
    /// partition fold.
    pub peak_buffered_entries: u64,
}

impl IngestReport {
    fn absorb(&mut self, o: &IngestReport) {
        self.files += o.files;
        self.lines += o.lines;
        self.records += o.records;
        self.malformed += o.malformed;
        self.unknown_tower += o.unknown_tower;
        self.users_in += o.users_in;
        self.bots += o.bots;
        self.peak_buffered_entries = self.peak_buffered_entries.max(o.peak_buffered_entries);
    }
}

/// One user's folded data.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDaily {
    pub user_id: String,
    pub n_records: u64,
    /// Civil dates carrying at least one record.
    pub record_days: Vec<Day>,
    pub daily: DailySeries,
}

impl UserDaily {
    pub fn span_days(&self) -> i64 {
        match (self.record_days.first(), self.record_days.last()) {
            (Some(a), Some(b)) => (*b - *a + 1) as i64,
            _ => 0,
        }
    }

    /// Average records per day over the user's own first..last day.
    pub fn avg_records_per_day(&self) -> f64 {
        let span = self.span_days();
        if span == 0 {
            0.0
        } else {
            self.n_records as f64 / span as f64
        }
    }
}

/// Users whose average strictly exceeds `max_avg` are removed.
pub fn filter_bots(users: Vec<UserDaily>, max_avg: f64) -> (Vec<UserDaily>, u64) {
    let before = users.len();
    let kept: Vec<UserDaily> = users
        .into_iter()
        .filter(|u| u.avg_records_per_day() <= max_avg)
        .collect();
    let removed = (before - kept.len()) as u64;
    (kept, removed)
}

fn partition_of(user: &str, n: usize) -> usize {
    let mut h = DefaultHasher::new();
    user.hash(&mut h);
    (h.finish() % n as u64) as usize
}

struct SpillRecord {
    user: String,
    day: i32,
    hour: u8,
    cell: CellId,
}

fn write_spill(w: &mut impl Write, user: &str, day: Day, hour: u8, cell: CellId) -> std::io::Result<()> {
    w.write_all(&(user.len() as u16).to_le_bytes())?;
    w.write_all(user.as_bytes())?;
    w.write_all(&day.0.to_le_bytes())?;
    w.write_all(&[hour])?;
    w.write_all(&cell.to_le_bytes())
}

fn read_spill(r: &mut impl Read) -> std::io::Result<Option<SpillRecord>> {
    let mut len = [0u8; 2];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let mut user = vec![0u8; u16::from_le_bytes(len) as usize];
    r.read_exact(&mut user)?;
    let mut rest = [0u8; 9];
    r.read_exact(&mut rest)?;
    Ok(Some(SpillRecord {
        user: String::from_utf8(user).map_err(|e| std::io::Error::other(e.to_string()))?,
        day: i32::from_le_bytes(rest[0..4].try_into().expect("4 bytes")),
        hour: rest[4],
        cell: u32::from_le_bytes(rest[5..9].try_into().expect("4 bytes")),
    }))
}

/// Parses one input source into its own set of spill files.
fn spill_source(
    reader: Box<dyn BufRead + Send>,
    source: &Path,
    network: &LocationNetwork,
    cfg: &IngestConfig,
    dir: &Path,
    tag: usize,
) -> Result<IngestReport> {
    let mut report = IngestReport {
        files: 1,
        ..Default::default()
    };
    let paths: Vec<PathBuf> = (0..cfg.partitions)
        .map(|p| dir.join(format!("src{tag:05}_part{p:04}.bin")))
        .collect();
    let mut writers = Vec::with_capacity(cfg.partitions);
    for p in &paths {
        writers.push(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?));
    }
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.trim_start().starts_with("user_id") {
            continue;
        }
        report.lines += 1;
        let Ok(rec) = parse_line(&line) else {
            report.malformed += 1;
            continue;
        };
        let Some(cell) = network.cell_of(rec.tower_id) else {
            report.unknown_tower += 1;
            continue;
        };
        report.records += 1;
        let (day, hour) = civil_day_hour(rec.timestamp, cfg.utc_offset_secs);
        let p = partition_of(rec.user_id, cfg.partitions);
        write_spill(&mut writers[p], rec.user_id, day, hour, cell).map_err(|e| Error::io(&paths[p], e))?;
    }
    for (w, p) in writers.into_iter().zip(&paths) {
        w.into_inner().map_err(|e| Error::io(p, e.into_error()))?;
    }
    Ok(report)
}

type HourCounts = Vec<(CellId, u32)>;

/// Folds one partition's spill files into per-user daily series.
/// Record count and hourly cell counts of one user.
type UserSlots = (u64, BTreeMap<(Day, u8), HourCounts>);

fn fold_partition(files: &[PathBuf]) -> Result<(Vec<UserDaily>, u64)> {
    let mut users: HashMap<String, UserSlots> = HashMap::new();
    let mut entries: u64 = 0;
    for path in files {
        let mut r = BufReader::with_capacity(1 << 16, File::open(path).map_err(|e| Error::io(path, e))?);
        while let Some(rec) = read_spill(&mut r).map_err(|e| Error::io(path, e))? {
            let (n, slots) = users.entry(rec.user).or_default();
            *n += 1;
            let counts = slots.entry((Day(rec.day), rec.hour)).or_default();
            let before = counts.len();
            location::bump(counts, rec.cell, 1);
            entries += (counts.len() - before) as u64;
        }
    }
    let mut out: Vec<UserDaily> = users
        .into_iter()
        .map(|(user_id, (n_records, slots))| {
            let mut record_days: Vec<Day> = slots.keys().map(|&(d, _)| d).collect();
            record_days.dedup();
            let hourly = location::hourly_from_counts(slots);
            UserDaily {
                user_id,
                n_records,
                record_days,
                daily: location::daily(&hourly),
            }
        })
        .collect();
    out.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    Ok((out, entries))
}

/// A named line source; files are opened lazily by the worker that parses them.
pub enum Source {
    File(PathBuf),
    Lines(String, Vec<String>),
}

impl Source {
    fn name(&self) -> PathBuf {
        match self {
            Source::File(p) => p.clone(),
            Source::Lines(name, _) => PathBuf::from(name),
        }
    }

    fn open(&self) -> Result<Box<dyn BufRead + Send>> {
        match self {
            Source::File(p) => io::open(p),
            Source::Lines(_, lines) => {
                let mut buf = lines.join("\n");
                buf.push('\n');
                Ok(Box::new(std::io::Cursor::new(buf.into_bytes())))
            }
        }
    }
}

fn spill_root(cfg: &IngestConfig) -> Result<tempfile::TempDir> {
    let base = cfg
        .spill_dir
        .clone()
        .or_else(|| std::env::var_os(SPILL_DIR_ENV).map(PathBuf::from));
    match base {
        Some(b) => {
            std::fs::create_dir_all(&b).map_err(|e| Error::io(&b, e))?;
            tempfile::Builder::new()
                .prefix("cdrmig-spill")
                .tempdir_in(&b)
                .map_err(|e| Error::io(&b, e))
        }
        None => tempfile::Builder::new()
            .prefix("cdrmig-spill")
            .tempdir()
            .map_err(|e| Error::io(std::env::temp_dir(), e)),
    }
}

/// Parses every source and returns non-bot users sorted by id. Runs on the
/// current rayon pool; the result does not depend on its size.
pub fn ingest(
    sources: &[Source],
    network: &LocationNetwork,
    cfg: &IngestConfig,
) -> Result<(Vec<UserDaily>, IngestReport)> {
    if cfg.partitions == 0 {
        return Err(Error::config("partition count must be positive"));
    }
    let dir = spill_root(cfg)?;
    let reports: Vec<IngestReport> = sources
        .par_iter()
        .enumerate()
        .map(|(tag, src)| spill_source(src.open()?, &src.name(), network, cfg, dir.path(), tag))
        .collect::<Result<_>>()?;
    let mut report = IngestReport::default();
    for r in &reports {
        report.absorb(r);
    }
    let folded: Vec<(Vec<UserDaily>, u64)> = (0..cfg.partitions)
        .into_par_iter()
        .map(|p| {
            let files: Vec<PathBuf> = (0..sources.len())
                .map(|tag| dir.path().join(format!("src{tag:05}_part{p:04}.bin")))
                .collect();
            let res = fold_partition(&files);
            for f in &files {
                let _ = std::fs::remove_file(f);
            }
            res
        })
        .collect::<Result<_>>()?;
    let mut users = Vec::new();
    for (part, entries) in folded {
        report.peak_buffered_entries = report.peak_buffered_entries.max(entries);
        users.extend(part);
    }
    users.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    report.users_in = users.len() as u64;
    let (users, bots) = filter_bots(users, cfg.max_avg_records_per_day);
    report.bots = bots;
    Ok((users, report))
}

/// Writes `user_id,date,cell_id`.
pub fn write_daily(path: &Path, users: &[UserDaily]) -> Result<()> {
    let mut w = io::csv_writer(path)?;
    w.write_record(["user_id", "date", "cell_id"])?;
    for u in users {
        for (d, c) in &u.daily {
            w.write_record([u.user_id.as_str(), &d.to_string(), &c.to_string()])?;
        }
    }
    io::finish_csv(path, w)
}

/// Reads a daily dump back as `(user_id, series)` sorted by user.
pub fn read_daily(path: &Path) -> Result<Vec<(String, DailySeries)>> {
    let mut r = io::csv_reader(path)?;
    let cols = io::columns(path, r.headers()?, &["user_id", "date", "cell_id"])?;
    let mut by_user: BTreeMap<String, DailySeries> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let day: Day = rec[cols[1]]
            .parse()
            .map_err(|e: Error| io::parse_error(path, line, e.to_string()))?;
        let cell: CellId = io::parse_field(path, line, &rec[cols[2]])?;
        by_user.entry(rec[cols[0]].to_string()).or_default().push((day, cell));
    }
    let mut out: Vec<(String, DailySeries)> = by_user.into_iter().collect();
    for (_, s) in &mut out {
        s.sort();
        s.dedup_by_key(|x| x.0);
    }
    Ok(out)
}
