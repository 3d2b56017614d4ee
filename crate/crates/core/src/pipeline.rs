//! End-to-end orchestration.
//!
//! Each stage reads and writes headered CSV files, and [`run`] chains the
//! same file-level stages, so running them one by one reproduces its
//! outputs byte for byte. Every output is written under a temporary name
//! and renamed once complete.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::aggregation::{count_users, AggregationParams, CellCounts, Confidence, CorpusWindow, MigrationTable};
use crate::calendar::{Day, Window};
use crate::error::{Error, Result};
use crate::ingest::{self, IngestConfig, IngestReport, Source};
use crate::network::LocationNetwork;
use crate::profile::{self, FilterConstraints};
use crate::segmentation::{self, DetectionParams, UserSegments};
use crate::weighting::{self, coverage_shortfall, Strata, WeightTable};

/// Named observational constraint triple.
#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    pub name: String,
    pub constraints: FilterConstraints,
}

impl Subset {
    pub fn published() -> Vec<Subset> {
        vec![
            Subset {
                name: "A".into(),
                constraints: FilterConstraints::SUBSET_A,
            },
            Subset {
                name: "B".into(),
                constraints: FilterConstraints::SUBSET_B,
            },
        ]
    }

    /// Parses `NAME=span/frac/gap`.
    pub fn parse(s: &str) -> Result<Subset> {
        let (name, c) = s
            .split_once('=')
            .ok_or_else(|| Error::config(format!("subset `{s}`: expected NAME=span/frac/gap")))?;
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(Error::config(format!("subset name `{name}` must be alphanumeric")));
        }
        Ok(Subset {
            name: name.to_string(),
            constraints: FilterConstraints::parse(c)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub network: PathBuf,
    pub strata: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub subsets: Vec<Subset>,
    pub detection: DetectionParams,
    /// `tau_min_days` is replaced by each entry of `taus`.
    pub aggregation: AggregationParams,
    pub taus: Vec<i32>,
    pub weighting: bool,
    /// Corpus window for edge exclusion; derived from the data when absent.
    pub window: Option<Window>,
    pub trail_cap: Option<usize>,
    pub ingest: IngestConfig,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn new(inputs: Vec<PathBuf>, network: PathBuf, out_dir: PathBuf) -> RunConfig {
        RunConfig {
            inputs,
            network,
            strata: None,
            out_dir,
            subsets: Subset::published(),
            detection: DetectionParams::default(),
            aggregation: AggregationParams::default(),
            taus: vec![20, 30, 60],
            weighting: true,
            window: None,
            trail_cap: None,
            ingest: IngestConfig::default(),
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::config("no CDR input files"));
        }
        if self.subsets.is_empty() || self.taus.is_empty() {
            return Err(Error::config("need at least one subset and one tau"));
        }
        let names: BTreeSet<&str> = self.subsets.iter().map(|s| s.name.as_str()).collect();
        if names.len() != self.subsets.len() {
            return Err(Error::config("subset names must be distinct"));
        }
        if self.weighting && self.strata.is_none() {
            return Err(Error::config("weighting needs a strata table (or disable weighting)"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("worker count must be positive"));
        }
        self.detection.validate()?;
        for &tau in &self.taus {
            AggregationParams {
                tau_min_days: tau,
                ..self.aggregation
            }
            .validate()?;
        }
        Ok(())
    }
}

pub fn dataset_name(weighted: bool, subset: &str, tau: i32) -> String {
    let kind = if weighted { "weighted" } else { "unweighted" };
    format!("{kind}_{subset}_{tau}days.csv.gz")
}

pub fn users_file(subset: &str) -> String {
    format!("users_{subset}.txt")
}

pub const DAILY_FILE: &str = "daily.csv.gz";
pub const PROFILES_FILE: &str = "profiles.csv";
pub const SEGMENTS_FILE: &str = "segments.csv.gz";
pub const REPORT_FILE: &str = "run_report.csv";

/// Runs `f` on the current pool, or on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Writes `path` through `write`, which receives a temporary sibling path
/// with the same extension. The file appears only if `write` succeeds.
pub fn commit<T>(path: &Path, write: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::config(format!("{}: not a file path", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".partial-{name}"));
    match write(&tmp) {
        Ok(v) => {
            std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
            Ok(v)
        }
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

/// One line of the run report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub stage: String,
    pub scope: String,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub lines: Vec<ReportLine>,
}

impl RunReport {
    fn push(&mut self, stage: &str, scope: &str, key: &str, value: impl ToString) {
        self.lines.push(ReportLine {
            stage: stage.into(),
            scope: scope.into(),
            key: key.into(),
            value: value.to_string(),
        });
    }

    pub fn get(&self, stage: &str, scope: &str, key: &str) -> Option<&str> {
        self.lines
            .iter()
            .find(|l| l.stage == stage && l.scope == scope && l.key == key)
            .map(|l| l.value.as_str())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = crate::io::csv_writer(path)?;
        w.write_record(["stage", "scope", "key", "value"])?;
        for l in &self.lines {
            w.write_record([&l.stage, &l.scope, &l.key, &l.value])?;
        }
        crate::io::finish_csv(path, w)
    }
}

/// Parses CDR files and writes the daily dump and observation profiles.
pub fn ingest_stage(
    inputs: &[PathBuf],
    network: &LocationNetwork,
    cfg: &IngestConfig,
    daily_out: &Path,
    profiles_out: &Path,
) -> Result<IngestReport> {
    let sources: Vec<Source> = inputs.iter().cloned().map(Source::File).collect();
    let (users, report) = ingest::ingest(&sources, network, cfg)?;
    let profiles: Vec<_> = users
        .iter()
        .filter_map(|u| profile::profile(&u.user_id, u.n_records, &u.record_days))
        .collect();
    commit(daily_out, |p| ingest::write_daily(p, &users))?;
    commit(profiles_out, |p| profile::write_profiles(p, &profiles))?;
    Ok(report)
}

/// Writes one user list per subset into `dir`; returns the subset sizes.
pub fn filter_stage(profiles: &Path, subsets: &[Subset], dir: &Path) -> Result<Vec<(String, usize)>> {
    let profiles = profile::read_profiles(profiles)?;
    subsets
        .iter()
        .map(|s| {
            let users = profile::select_subset(&profiles, &s.constraints);
            commit(&dir.join(users_file(&s.name)), |p| profile::write_user_list(p, &users))?;
            Ok((s.name.clone(), users.len()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectSummary {
    pub users: usize,
    pub without_home: usize,
}

/// Segments every user of the daily dump (restricted to `keep` if given).
pub fn detect_stage(
    daily: &Path,
    keep: Option<&BTreeSet<String>>,
    params: &DetectionParams,
    out: &Path,
) -> Result<DetectSummary> {
    params.validate()?;
    let series = ingest::read_daily(daily)?;
    let selected: Vec<&(String, _)> = series
        .iter()
        .filter(|(u, _)| keep.is_none_or(|k| k.contains(u)))
        .collect();
    let detected: Vec<Option<(String, UserSegments)>> = selected
        .par_iter()
        .map(|(u, s)| segmentation::detect_user(s, params).map(|seg| (u.clone(), seg)))
        .collect();
    let without_home = detected.iter().filter(|d| d.is_none()).count();
    let users: Vec<(String, UserSegments)> = detected.into_iter().flatten().collect();
    commit(out, |p| segmentation::write_segments(p, &users))?;
    Ok(DetectSummary {
        users: selected.len(),
        without_home,
    })
}

/// Whole calendar months covering every user's observation span.
pub fn data_window(users: &[(String, UserSegments)]) -> Option<Window> {
    let first = users.iter().map(|(_, u)| u.first_day).min()?;
    let last = users.iter().map(|(_, u)| u.last_day).max()?;
    Some(Window::new(first.month_key().first_day(), last.month_key().last_day()))
}

/// Edge-exclusion window: explicit, or derived from the segments.
pub fn corpus_window(
    users: &[(String, UserSegments)],
    window: Option<Window>,
    trail_cap: Option<usize>,
) -> Result<CorpusWindow> {
    let window = match window {
        Some(w) => w,
        None => data_window(users).ok_or_else(|| Error::data("no segmented users to aggregate"))?,
    };
    Ok(CorpusWindow { window, trail_cap })
}

/// Parses `YYYY-MM-DD:YYYY-MM-DD`.
pub fn parse_window(s: &str) -> Result<Window> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::config(format!("window `{s}`: expected START:END")))?;
    let a: Day = a.parse().map_err(|_| Error::config(format!("window `{s}`: bad start")))?;
    let b: Day = b.parse().map_err(|_| Error::config(format!("window `{s}`: bad end")))?;
    if b < a {
        return Err(Error::config(format!("window `{s}` ends before it starts")));
    }
    Ok(Window::new(a, b))
}

/// Counts of one subset over the half-months kept by the edge schedule.
pub fn subset_counts(
    users: &[(String, UserSegments)],
    keep: &BTreeSet<String>,
    params: &AggregationParams,
    corpus: &CorpusWindow,
) -> CellCounts {
    let selected: Vec<UserSegments> = users
        .iter()
        .filter(|(u, _)| keep.contains(u))
        .map(|(_, s)| s.clone())
        .collect();
    count_users(&selected, &corpus.kept(params.tau_min_days), params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableSummary {
    pub users: u64,
    pub rows: usize,
    pub excluded_half_months: usize,
    pub duplicates: u64,
    pub unweighted_contributions: u64,
    /// Largest population left without any observed user, over (t, measure).
    pub max_shortfall: f64,
}

fn summary(counts: &CellCounts, table: &MigrationTable<f64>, corpus: &CorpusWindow, tau: i32) -> TableSummary {
    TableSummary {
        users: counts.users,
        rows: table.rows.len(),
        excluded_half_months: corpus.excluded(tau).len(),
        duplicates: counts.duplicates,
        unweighted_contributions: table.unweighted_contributions,
        max_shortfall: 0.0,
    }
}

/// Unweighted table of one subset and tau.
pub fn aggregate_stage(
    segments: &Path,
    network: &LocationNetwork,
    keep: &BTreeSet<String>,
    params: &AggregationParams,
    window: Option<Window>,
    trail_cap: Option<usize>,
    out: &Path,
) -> Result<TableSummary> {
    params.validate()?;
    let users = segmentation::read_segments(segments)?;
    let corpus = corpus_window(&users, window, trail_cap)?;
    let counts = subset_counts(&users, keep, params, &corpus);
    let table = MigrationTable::<f64>::unweighted(&counts, network, params.confidence);
    commit(out, |p| table.write_csv(p))?;
    Ok(summary(&counts, &table, &corpus, params.tau_min_days))
}

/// Weighted table of one subset and tau; the weights themselves go to
/// `weights_out` when given.
#[allow(clippy::too_many_arguments)]
pub fn weight_stage(
    segments: &Path,
    network: &LocationNetwork,
    strata: &Strata,
    keep: &BTreeSet<String>,
    params: &AggregationParams,
    window: Option<Window>,
    trail_cap: Option<usize>,
    out: &Path,
    weights_out: Option<&Path>,
) -> Result<TableSummary> {
    params.validate()?;
    let users = segmentation::read_segments(segments)?;
    let corpus = corpus_window(&users, window, trail_cap)?;
    let counts = subset_counts(&users, keep, params, &corpus);
    let weights = WeightTable::<f64>::compute(strata, &counts)?;
    let table = MigrationTable::tabulate(&counts, network, params.confidence, true, |c, t, m| {
        weights.weight(strata, c, t, m)
    });
    commit(out, |p| table.write_csv(p))?;
    if let Some(w) = weights_out {
        commit(w, |p| weights.write_csv(p, strata))?;
    }
    let periods = corpus.kept(params.tau_min_days);
    let mut s = summary(&counts, &table, &corpus, params.tau_min_days);
    s.max_shortfall = coverage_shortfall(strata, &weights, &periods)
        .values()
        .copied()
        .fold(0.0, f64::max);
    Ok(s)
}

/// Runs every stage and writes the datasets and the run report into
/// `cfg.out_dir`. On failure every file this run created is removed.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut created = Vec::new();
    let res = with_workers(cfg.workers, || run_stages(cfg, &mut created)).and_then(|r| r);
    if res.is_err() {
        for p in created {
            let _ = std::fs::remove_file(p);
        }
    }
    res
}

fn run_stages(cfg: &RunConfig, created: &mut Vec<PathBuf>) -> Result<RunReport> {
    let out = |name: &str| cfg.out_dir.join(name);
    let mut report = RunReport::default();
    let network = LocationNetwork::read_csv(&cfg.network)?;
    let strata = cfg.strata.as_deref().map(weighting::read_strata).transpose()?;

    let (daily, profiles) = (out(DAILY_FILE), out(PROFILES_FILE));
    created.extend([daily.clone(), profiles.clone()]);
    let ing = ingest_stage(&cfg.inputs, &network, &cfg.ingest, &daily, &profiles)?;
    for (k, v) in [
        ("files", ing.files),
        ("lines", ing.lines),
        ("records", ing.records),
        ("malformed", ing.malformed),
        ("unknown_tower", ing.unknown_tower),
        ("users_in", ing.users_in),
        ("bots", ing.bots),
        ("peak_buffered_entries", ing.peak_buffered_entries),
    ] {
        report.push("ingest", "all", k, v);
    }

    created.extend(cfg.subsets.iter().map(|s| out(&users_file(&s.name))));
    let sizes = filter_stage(&profiles, &cfg.subsets, &cfg.out_dir)?;
    let mut lists = Vec::new();
    let mut union = BTreeSet::new();
    for (name, kept) in &sizes {
        report.push("filter", name, "users_kept", kept);
        report.push("filter", name, "users_filtered", ing.users_in - ing.bots - *kept as u64);
        report.push("filter", name, "bots", ing.bots);
        let list = profile::read_user_list(&out(&users_file(name)))?;
        union.extend(list.iter().cloned());
        lists.push((name.clone(), list));
    }

    let segments = out(SEGMENTS_FILE);
    created.push(segments.clone());
    let det = detect_stage(&daily, Some(&union), &cfg.detection, &segments)?;
    report.push("detect", "all", "users", det.users);
    report.push("detect", "all", "users_without_home", det.without_home);

    for (name, list) in &lists {
        for &tau in &cfg.taus {
            let params = AggregationParams {
                tau_min_days: tau,
                ..cfg.aggregation
            };
            let scope = format!("{name}_{tau}days");
            let path = out(&dataset_name(false, name, tau));
            created.push(path.clone());
            let s = aggregate_stage(&segments, &network, list, &params, cfg.window, cfg.trail_cap, &path)?;
            report.push("aggregate", &scope, "users", s.users);
            report.push("aggregate", &scope, "rows", s.rows);
            report.push("aggregate", &scope, "excluded_half_months", s.excluded_half_months);
            report.push("aggregate", &scope, "duplicate_events", s.duplicates);
            if let Some(strata) = strata.as_ref().filter(|_| cfg.weighting) {
                let path = out(&dataset_name(true, name, tau));
                let wpath = out(&format!("weights_{name}_{tau}days.csv"));
                created.extend([path.clone(), wpath.clone()]);
                let s = weight_stage(
                    &segments,
                    &network,
                    strata,
                    list,
                    &params,
                    cfg.window,
                    cfg.trail_cap,
                    &path,
                    Some(&wpath),
                )?;
                report.push("weight", &scope, "rows", s.rows);
                report.push("weight", &scope, "unweighted_contributions", s.unweighted_contributions);
                report.push("weight", &scope, "max_coverage_shortfall", crate::io::fmt_f64(s.max_shortfall));
            }
        }
    }
    report.push("run", "all", "confidence", cfg.aggregation.confidence);
    let rpath = out(REPORT_FILE);
    created.push(rpath.clone());
    commit(&rpath, |p| report.write(p))?;
    Ok(report)
}

/// Confidence accepted on the command line.
pub fn parse_confidence(s: &str) -> Result<Confidence> {
    s.parse()
}
