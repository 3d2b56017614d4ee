use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cdrmig::aggregation::{AggregationParams, Confidence};
use cdrmig::calendar::Window;
use cdrmig::error::{Error, Result};
use cdrmig::ingest::IngestConfig;
use cdrmig::network::{self, LocationNetwork};
use cdrmig::pipeline::{self, RunConfig, Subset};
use cdrmig::profile;
use cdrmig::segmentation::DetectionParams;
use cdrmig::synth::{self, validate, ScenarioConfig};
use cdrmig::weighting;

/// Temporary migration statistics from call detail records.
#[derive(Parser)]
#[command(name = "cdrmig", version)]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the location network from towers and city polygons.
    Network {
        #[arg(long)]
        towers: PathBuf,
        #[arg(long)]
        polygons: Option<PathBuf>,
        /// Towers closer than this are merged into one urban cell.
        #[arg(long, default_value_t = 1000.0)]
        merge_radius: f64,
        /// cell_id,region_id,zone table overriding the default regions.
        #[arg(long)]
        regions: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse CDR files into daily locations and observation profiles.
    Ingest {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        ingest: IngestArgs,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Select the users of each subset from the profiles.
    Filter {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        subsets: SubsetArgs,
    },
    /// Detect home and migration segments.
    Detect {
        #[arg(long)]
        daily: PathBuf,
        /// User lists; their union is segmented. Every user when omitted.
        #[arg(long)]
        users: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        detection: DetectArgs,
    },
    /// Build one unweighted table.
    Aggregate {
        #[command(flatten)]
        table: TableArgs,
    },
    /// Build one weighted table.
    Weight {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long)]
        strata: PathBuf,
        /// Also write the per-stratum weights here.
        #[arg(long)]
        weights_out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with its ground truth.
    Synth {
        /// Scenario file of key=value lines; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score detection and filtering on synthetic corpora.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        detection: DetectArgs,
    },
    /// Run every stage and emit all datasets.
    Run {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        strata: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Emit unweighted tables only.
        #[arg(long)]
        no_weighting: bool,
        #[arg(long = "tau", value_delimiter = ',', default_values_t = [20, 30, 60])]
        taus: Vec<i32>,
        #[command(flatten)]
        subsets: SubsetArgs,
        #[command(flatten)]
        ingest: IngestArgs,
        #[command(flatten)]
        detection: DetectArgs,
        #[command(flatten)]
        aggregation: AggArgs,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct IngestArgs {
    /// Local time offset applied to UTC timestamps, in hours.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    utc_offset_hours: f64,
    /// Users above this average of records per active day are dropped.
    #[arg(long)]
    max_records_per_day: Option<f64>,
    #[arg(long)]
    spill_dir: Option<PathBuf>,
}

impl IngestArgs {
    fn config(&self) -> Result<IngestConfig> {
        let mut c = IngestConfig::default();
        let secs = self.utc_offset_hours * 3600.0;
        if !secs.is_finite() || secs.abs() > 14.0 * 3600.0 {
            return Err(Error::config(format!("utc offset {} h out of range", self.utc_offset_hours)));
        }
        c.utc_offset_secs = secs.round() as i32;
        if let Some(m) = self.max_records_per_day {
            c.max_avg_records_per_day = m;
        }
        if self.spill_dir.is_some() {
            c.spill_dir = self.spill_dir.clone();
        }
        Ok(c)
    }
}

#[derive(Args)]
struct SubsetArgs {
    /// NAME=min_span/min_frac/max_gap; the published A and B by default.
    #[arg(long = "subset")]
    subsets: Vec<String>,
}

impl SubsetArgs {
    fn subsets(&self) -> Result<Vec<Subset>> {
        if self.subsets.is_empty() {
            return Ok(Subset::published());
        }
        self.subsets.iter().map(|s| Subset::parse(s)).collect()
    }
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long, default_value_t = 180)]
    tau_max: i32,
    #[arg(long, default_value_t = 6)]
    eps_gap_macro: i32,
    #[arg(long, default_value_t = 7)]
    eps_meso: i32,
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    #[arg(long, default_value_t = 10)]
    min_month_days: usize,
}

impl DetectArgs {
    fn params(&self) -> DetectionParams {
        DetectionParams {
            tau_max_days: self.tau_max,
            eps_gap_macro_months: self.eps_gap_macro,
            eps_gap_meso_days: self.eps_meso,
            phi: self.phi,
            min_month_days: self.min_month_days,
            ..DetectionParams::default()
        }
    }
}

#[derive(Args)]
struct AggArgs {
    #[arg(long, default_value_t = 7)]
    eps_tol: i32,
    #[arg(long, default_value_t = 8)]
    sigma: i32,
    /// high, or high+low to also count low-confidence migrations.
    #[arg(long, default_value = "high")]
    confidence: String,
    /// Corpus window START:END (YYYY-MM-DD); derived from the data by default.
    #[arg(long)]
    window: Option<String>,
    /// Cap on trailing half-months excluded at the end of the corpus.
    #[arg(long)]
    trail_cap: Option<usize>,
}

impl AggArgs {
    fn params(&self, tau: i32, eps_meso: i32) -> Result<AggregationParams> {
        let p = AggregationParams {
            eps_tol_days: self.eps_tol,
            sigma_days: self.sigma,
            eps_gap_meso_days: eps_meso,
            tau_min_days: tau,
            confidence: self.confidence.parse::<Confidence>()?,
        };
        p.validate()?;
        Ok(p)
    }

    fn window(&self) -> Result<Option<Window>> {
        self.window.as_deref().map(pipeline::parse_window).transpose()
    }
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    segments: PathBuf,
    #[arg(long)]
    network: PathBuf,
    /// User list of the subset to tabulate.
    #[arg(long)]
    users: PathBuf,
    #[arg(long, default_value_t = 20)]
    tau: i32,
    /// Must equal the value used at detection.
    #[arg(long, default_value_t = 7)]
    eps_meso: i32,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    aggregation: AggArgs,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn user_set(path: &Path) -> Result<BTreeSet<String>> {
    profile::read_user_list(path)
}

fn execute(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Network { towers, polygons, merge_radius, regions, out } => {
            let towers = network::read_towers(&towers)?;
            let polygons = polygons.as_deref().map(network::read_polygons).transpose()?.unwrap_or_default();
            let mut net = network::build_network(&towers, &polygons, merge_radius)?;
            if let Some(r) = regions {
                net = net.assign_regions(&network::read_region_table(&r)?)?;
            }
            pipeline::commit(&out, |p| net.write_csv(p))?;
            eprintln!("{} towers -> {} cells", towers.len(), net.len());
        }
        Cmd::Ingest { network, out_dir, ingest, inputs } => {
            mkdir(&out_dir)?;
            let net = LocationNetwork::read_csv(&network)?;
            let r = pipeline::ingest_stage(
                &inputs,
                &net,
                &ingest.config()?,
                &out_dir.join(pipeline::DAILY_FILE),
                &out_dir.join(pipeline::PROFILES_FILE),
            )?;
            eprintln!(
                "{} records, {} users, {} bots, {} malformed, {} unknown towers",
                r.records, r.users_in, r.bots, r.malformed, r.unknown_tower
            );
        }
        Cmd::Filter { profiles, out_dir, subsets } => {
            mkdir(&out_dir)?;
            for (name, n) in pipeline::filter_stage(&profiles, &subsets.subsets()?, &out_dir)? {
                eprintln!("subset {name}: {n} users");
            }
        }
        Cmd::Detect { daily, users, out, detection } => {
            let keep = if users.is_empty() {
                None
            } else {
                let mut all = BTreeSet::new();
                for u in &users {
                    all.extend(user_set(u)?);
                }
                Some(all)
            };
            let s = pipeline::detect_stage(&daily, keep.as_ref(), &detection.params(), &out)?;
            eprintln!("{} users, {} without a home", s.users, s.without_home);
        }
        Cmd::Aggregate { table } => {
            let net = LocationNetwork::read_csv(&table.network)?;
            let s = pipeline::aggregate_stage(
                &table.segments,
                &net,
                &user_set(&table.users)?,
                &table.aggregation.params(table.tau, table.eps_meso)?,
                table.aggregation.window()?,
                table.aggregation.trail_cap,
                &table.out,
            )?;
            eprintln!("{} users, {} rows", s.users, s.rows);
        }
        Cmd::Weight { table, strata, weights_out } => {
            let net = LocationNetwork::read_csv(&table.network)?;
            let strata = weighting::read_strata(&strata)?;
            let s = pipeline::weight_stage(
                &table.segments,
                &net,
                &strata,
                &user_set(&table.users)?,
                &table.aggregation.params(table.tau, table.eps_meso)?,
                table.aggregation.window()?,
                table.aggregation.trail_cap,
                &table.out,
                weights_out.as_deref(),
            )?;
            eprintln!("{} users, {} rows, max coverage shortfall {}", s.users, s.rows, s.max_shortfall);
        }
        Cmd::Synth { config, out_dir } => {
            let cfg = scenario(config.as_deref())?;
            mkdir(&out_dir)?;
            let cdr = out_dir.join("cdr.csv.gz");
            let n = pipeline::commit(&cdr, |p| {
                let mut sink = cdrmig::io::create(p)?;
                let n = synth::write_corpus(&mut sink, &cfg)?;
                sink.finish().map_err(|e| Error::io(p, e))?;
                Ok(n)
            })?;
            pipeline::commit(&out_dir.join("network.csv"), |p| synth::network(&cfg).write_csv(p))?;
            pipeline::commit(&out_dir.join("strata.csv"), |p| weighting::write_strata(p, &synth::strata(&cfg)?))?;
            let agents = synth::generate(&cfg)?;
            pipeline::commit(&out_dir.join("truth.csv"), |p| synth::write_truth(p, &cfg, &agents))?;
            eprintln!("{} agents, {n} records", cfg.agents);
        }
        Cmd::Validate { config, grid, out_dir, detection } => {
            let cfg = scenario(config.as_deref())?;
            let grid = match grid {
                Some(g) => validate::ValidationGrid::parse(&read_text(&g)?)?,
                None => validate::ValidationGrid::default(),
            };
            mkdir(&out_dir)?;
            let params = detection.params();
            let report = validate::run(&cfg, &grid, &params)?;
            report.write(&out_dir)?;
        }
        Cmd::Run { network, strata, out_dir, no_weighting, taus, subsets, ingest, detection, aggregation, inputs } => {
            let mut cfg = RunConfig::new(inputs, network, out_dir);
            cfg.strata = strata;
            cfg.weighting = !no_weighting;
            cfg.taus = taus;
            cfg.subsets = subsets.subsets()?;
            cfg.ingest = ingest.config()?;
            cfg.detection = detection.params();
            cfg.aggregation = aggregation.params(cfg.aggregation.tau_min_days, cfg.detection.eps_gap_meso_days)?;
            cfg.window = aggregation.window()?;
            cfg.trail_cap = aggregation.trail_cap;
            let report = pipeline::run(&cfg)?;
            eprintln!("{} report lines written to {}", report.lines.len(), cfg.out_dir.join(pipeline::REPORT_FILE).display());
        }
    }
    Ok(())
}

fn scenario(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::parse(&read_text(p)?),
        None => Ok(ScenarioConfig::default()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = pipeline::with_workers(cli.workers, || execute(cli.cmd)).and_then(|r| r);
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
