//! Synthetic corpora with known ground truth, thinning, and the accuracy
//! experiments run on them.

mod config;
pub mod oracle;
pub mod validate;

pub use config::ScenarioConfig;

use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::calendar::{Day, Window};
use crate::error::{Error, Result};
use crate::location::DailySeries;
use crate::network::{synthetic_tower_id, CellId, LocationNetwork, Zone};
use crate::weighting::{build_strata, rural_density_median, CellInfo, Strata};

/// Minimum number of home days around every excursion.
pub const BUFFER_DAYS: i32 = 10;
/// Minimum spacing between two micro-trips.
pub const MICRO_SPACING_DAYS: i32 = 20;
/// First and last local hour carrying synthetic calls.
pub const CALL_HOURS: (u32, u32) = (8, 23);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Excursion {
    pub cell: CellId,
    pub start: Day,
    pub end: Day,
}

impl Excursion {
    pub fn len(&self) -> i32 {
        self.end - self.start + 1
    }

    fn clashes(&self, start: Day, end: Day, spacing: i32) -> bool {
        start.0 <= self.end.0 + spacing && end.0 >= self.start.0 - spacing
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTruth {
    pub user_id: String,
    pub home: CellId,
    /// Planted temporary migrations, sorted and at distinct destinations.
    pub events: Vec<Excursion>,
    /// Stays shorter than the migration threshold.
    pub micro: Vec<Excursion>,
    /// Observed days with their true cell and call count.
    pub days: Vec<(Day, CellId, u32)>,
}

impl AgentTruth {
    pub fn location(&self, d: Day) -> CellId {
        self.events
            .iter()
            .chain(&self.micro)
            .find(|e| e.start <= d && d <= e.end)
            .map_or(self.home, |e| e.cell)
    }

    pub fn daily(&self) -> DailySeries {
        self.days.iter().map(|&(d, c, _)| (d, c)).collect()
    }

    pub fn n_records(&self) -> u64 {
        self.days.iter().map(|&(_, _, n)| n as u64).sum()
    }
}

/// Cell attributes of a synthetic country: the first `urban_cells` cells
/// are urban and more populated.
pub fn cell_population(cfg: &ScenarioConfig, cell: CellId) -> f64 {
    if (cell as usize) < cfg.urban_cells {
        cfg.urban_pop
    } else {
        cfg.rural_pop
    }
}

/// Rural cells are grouped five to a district.
pub fn cell_district(cfg: &ScenarioConfig, cell: CellId) -> String {
    format!("D{}", (cell as usize).saturating_sub(cfg.urban_cells) / 5)
}

/// Population per unit area; rural cell areas cycle through 1..=4.
pub fn cell_density(cfg: &ScenarioConfig, cell: CellId) -> f64 {
    let area = if (cell as usize) < cfg.urban_cells { 1.0 } else { 1.0 + (cell % 4) as f64 };
    cell_population(cfg, cell) / area
}

/// Network of the synthetic country: tower `T<c>` is cell `c`, urban cells
/// are their own region and rural cells share their district's.
pub fn network(cfg: &ScenarioConfig) -> LocationNetwork {
    let mut net = LocationNetwork::trivial(cfg.cells as u32);
    for c in &mut net.cells {
        if (c.cell_id as usize) < cfg.urban_cells {
            c.zone = Zone::Urban;
            c.region_id = format!("city_{}", c.cell_id);
        } else {
            c.region_id = cell_district(cfg, c.cell_id);
        }
    }
    net
}

pub fn cell_info(cfg: &ScenarioConfig) -> Vec<CellInfo> {
    (0..cfg.cells as CellId)
        .map(|c| CellInfo {
            cell: c,
            zone: if (c as usize) < cfg.urban_cells { Zone::Urban } else { Zone::Rural },
            district: cell_district(cfg, c),
            pop_over_15: cell_population(cfg, c),
            density: Some(cell_density(cfg, c)),
        })
        .collect()
}

pub fn strata(cfg: &ScenarioConfig) -> Result<Strata> {
    let cells = cell_info(cfg);
    let median = rural_density_median(&cells).unwrap_or(0.0);
    build_strata(&cells, median)
}

fn agent_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> i32 {
    let (a, b) = ((lo as f64).ln(), (hi as f64 + 1.0).ln());
    (rng.random_range(a..b).exp().floor() as i32).clamp(lo, hi)
}

/// Generates one agent; agent `i` depends only on the config and `i`.
pub fn generate_agent(cfg: &ScenarioConfig, i: usize) -> AgentTruth {
    let mut rng = agent_rng(cfg.seed, i as u64);
    let window = cfg.window();
    let total_pop: f64 = (0..cfg.cells as CellId).map(|c| cell_population(cfg, c)).sum();
    let mut pick = rng.random_range(0.0..total_pop);
    let mut home = cfg.cells as CellId - 1;
    for c in 0..cfg.cells as CellId {
        pick -= cell_population(cfg, c);
        if pick < 0.0 {
            home = c;
            break;
        }
    }

    let years = window.len() as f64 / 365.0;
    let lo = window.start + BUFFER_DAYS;
    let hi = window.end - BUFFER_DAYS;
    let mut events: Vec<Excursion> = Vec::new();
    let n_events = draw_count(&mut rng, cfg.events_per_year * years);
    let budget = window.len() / 2;
    let mut used = 0;
    for _ in 0..n_events {
        for _attempt in 0..20 {
            let len = log_uniform(&mut rng, cfg.event_min_days, cfg.event_max_days);
            if hi - lo + 1 < len || used + len > budget {
                continue;
            }
            let start = lo + rng.random_range(0..=(hi - lo + 1 - len));
            let end = start + (len - 1);
            if events.iter().any(|e| e.clashes(start, end, BUFFER_DAYS)) {
                continue;
            }
            let taken: Vec<CellId> = events.iter().map(|e| e.cell).collect();
            let free: Vec<CellId> = (0..cfg.cells as CellId)
                .filter(|&c| c != home && !taken.contains(&c))
                .collect();
            if free.is_empty() {
                break;
            }
            let cell = free[rng.random_range(0..free.len())];
            events.push(Excursion { cell, start, end });
            used += len;
            break;
        }
    }
    events.sort_by_key(|e| e.start);

    let mut micro: Vec<Excursion> = Vec::new();
    let n_micro = draw_count(&mut rng, cfg.micro_trips_per_year * years);
    for _ in 0..n_micro {
        for _attempt in 0..20 {
            let len = rng.random_range(cfg.micro_min_days..=cfg.micro_max_days);
            if hi - lo + 1 < len {
                break;
            }
            let start = lo + rng.random_range(0..=(hi - lo + 1 - len));
            let end = start + (len - 1);
            if events.iter().any(|e| e.clashes(start, end, BUFFER_DAYS))
                || micro.iter().any(|e| e.clashes(start, end, MICRO_SPACING_DAYS))
            {
                continue;
            }
            let mut cell = rng.random_range(0..cfg.cells as CellId - 1);
            if cell >= home {
                cell += 1;
            }
            micro.push(Excursion { cell, start, end });
            break;
        }
    }
    micro.sort_by_key(|e| e.start);

    let mut truth = AgentTruth {
        user_id: format!("u{i:07}"),
        home,
        events,
        micro,
        days: Vec::new(),
    };
    let p_obs = if (home as usize) < cfg.urban_cells {
        cfg.obs_prob_urban.unwrap_or(cfg.obs_prob)
    } else {
        cfg.obs_prob
    };
    let calls = Poisson::new(cfg.calls_per_day.max(1.0) - 1.0 + f64::EPSILON).ok();
    let mut d = window.start;
    while d <= window.end {
        if p_obs >= 1.0 || rng.random_bool(p_obs.clamp(0.0, 1.0)) {
            let extra = calls.as_ref().map_or(0, |p| p.sample(&mut rng) as u32);
            truth.days.push((d, truth.location(d), 1 + extra));
        }
        d = d.succ();
    }
    truth
}

fn draw_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |p| p.sample(rng) as u64)
}

pub fn generate(cfg: &ScenarioConfig) -> Result<Vec<AgentTruth>> {
    cfg.validate()?;
    Ok((0..cfg.agents).map(|i| generate_agent(cfg, i)).collect())
}

/// Writes the agent's records as `user_id,timestamp,tower_id` lines.
/// Calls fall in the configured hours of each observed day (UTC).
pub fn write_records<W: Write>(out: &mut W, cfg: &ScenarioConfig, agent: &AgentTruth, idx: usize) -> std::io::Result<u64> {
    let mut rng = agent_rng(cfg.seed ^ 0x5eed_ca11, idx as u64);
    let mut n = 0;
    for &(d, cell, calls) in &agent.days {
        let tower = synthetic_tower_id(cell);
        for _ in 0..calls {
            let hour = rng.random_range(CALL_HOURS.0..=CALL_HOURS.1) as i64;
            let sec = rng.random_range(0..3600) as i64;
            let ts = d.0 as i64 * 86_400 + hour * 3600 + sec;
            writeln!(out, "{},{ts},{tower}", agent.user_id)?;
            n += 1;
        }
    }
    Ok(n)
}

/// Streams the whole corpus to `out` with a header line, one agent at a
/// time. Returns the number of records written.
pub fn write_corpus<W: Write>(out: &mut W, cfg: &ScenarioConfig) -> Result<u64> {
    cfg.validate()?;
    let io_err = |e| Error::io("<cdr output>", e);
    writeln!(out, "user_id,timestamp,tower_id").map_err(io_err)?;
    let mut n = 0;
    for i in 0..cfg.agents {
        let a = generate_agent(cfg, i);
        n += write_records(out, cfg, &a, i).map_err(io_err)?;
    }
    Ok(n)
}

/// Writes planted truth as `user_id,kind,cell_id,start,end`; `kind` is
/// `home` (spanning the horizon), `event` or `micro`.
pub fn write_truth(path: &std::path::Path, cfg: &ScenarioConfig, agents: &[AgentTruth]) -> Result<()> {
    let w = cfg.window();
    let mut out = crate::io::csv_writer(path)?;
    out.write_record(["user_id", "kind", "cell_id", "start", "end"])?;
    for a in agents {
        let rows = std::iter::once(("home", a.home, w.start, w.end))
            .chain(a.events.iter().map(|e| ("event", e.cell, e.start, e.end)))
            .chain(a.micro.iter().map(|e| ("micro", e.cell, e.start, e.end)));
        for (kind, cell, s, e) in rows {
            out.write_record([a.user_id.as_str(), kind, &cell.to_string(), &s.to_string(), &e.to_string()])?;
        }
    }
    crate::io::finish_csv(path, out)
}

/// Δ (retained span) and Ω (fraction of days observed within it).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinningPlan {
    pub delta_days: i32,
    pub omega: f64,
    pub seed: u64,
}

impl ThinningPlan {
    pub fn validate(&self) -> Result<()> {
        if self.delta_days < 1 || !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::config("thinning needs delta >= 1 and 0 < omega <= 1"));
        }
        Ok(())
    }

    /// Days kept: `ceil(omega * delta)`, at least the two window ends.
    pub fn kept_days(&self) -> usize {
        let k = (self.omega * self.delta_days as f64 - 1e-9).ceil() as usize;
        k.clamp(self.delta_days.min(2) as usize, self.delta_days as usize)
    }
}

/// Picks a window of `delta` days starting on an observed day and ending on
/// one, then keeps exactly `kept_days` observed days in it, both ends
/// included. Thinning days is the same as thinning records because a
/// synthetic day's location depends only on that day's calls. `None` when
/// the source has no such window with enough observed days.
pub fn thin(daily: &[(Day, CellId)], plan: &ThinningPlan, stream: u64) -> Option<(Window, DailySeries)> {
    let k = plan.kept_days();
    let delta = plan.delta_days;
    let mut starts: Vec<usize> = Vec::new();
    for (i, &(d, _)) in daily.iter().enumerate() {
        let end = d + (delta - 1);
        let j = daily.partition_point(|&(x, _)| x <= end);
        if daily[j - 1].0 == end && j - i >= k {
            starts.push(i);
        }
    }
    if starts.is_empty() {
        return None;
    }
    let mut rng = agent_rng(plan.seed, stream);
    let i = starts[rng.random_range(0..starts.len())];
    let start = daily[i].0;
    let end = start + (delta - 1);
    let j = daily.partition_point(|&(x, _)| x <= end);
    let inner = &daily[i..j];
    let mut keep: Vec<usize> = if k >= inner.len() {
        (0..inner.len()).collect()
    } else if k <= 2 || inner.len() <= 2 {
        vec![0, inner.len() - 1][..k.min(2)].to_vec()
    } else {
        let mut picked: Vec<usize> = sample(&mut rng, inner.len() - 2, k - 2)
            .into_iter()
            .map(|x| x + 1)
            .collect();
        picked.push(0);
        picked.push(inner.len() - 1);
        picked
    };
    keep.sort_unstable();
    keep.dedup();
    Some((Window::new(start, end), keep.into_iter().map(|x| inner[x]).collect()))
}
