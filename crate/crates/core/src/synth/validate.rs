//! Accuracy of home and migration detection under thinning, and the
//! selection bias introduced by observational constraints.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::calendar::overlap_len;
use crate::error::{Error, Result};
use crate::io;
use crate::network::CellId;
use crate::profile::{profile, FilterConstraints, ObservationProfile};
use crate::segmentation::{classify, detect_user, home_at, DetectionParams};

use super::{thin, AgentTruth, ScenarioConfig, ThinningPlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyPoint {
    pub delta_days: i32,
    pub omega: f64,
    /// Fraction correct; `NaN` when nothing could be evaluated.
    pub value: f64,
    pub n: u64,
    /// Agent/seed pairs whose trajectory could not be thinned as asked.
    pub skipped: u64,
}

fn point(delta_days: i32, omega: f64, hits: u64, n: u64, skipped: u64) -> AccuracyPoint {
    AccuracyPoint {
        delta_days,
        omega,
        value: if n == 0 { f64::NAN } else { hits as f64 / n as f64 },
        n,
        skipped,
    }
}

fn stream(agent: usize, seed_idx: usize) -> u64 {
    ((seed_idx as u64) << 40) | agent as u64
}

/// Share of agents whose detected home over the retained window (the
/// macro segment overlapping it most) is their planted home.
pub fn home_accuracy(
    agents: &[AgentTruth],
    deltas: &[i32],
    omegas: &[f64],
    seeds: &[u64],
    params: &DetectionParams,
) -> Vec<AccuracyPoint> {
    let mut out = Vec::new();
    for &delta in deltas {
        for &omega in omegas {
            let (hits, n, skipped) = agents
                .par_iter()
                .enumerate()
                .map(|(i, a)| {
                    let daily = a.daily();
                    let mut acc = (0u64, 0u64, 0u64);
                    for (si, &seed) in seeds.iter().enumerate() {
                        let plan = ThinningPlan { delta_days: delta, omega, seed };
                        let Some((w, thinned)) = thin(&daily, &plan, stream(i, si)) else {
                            acc.2 += 1;
                            continue;
                        };
                        let home = detect_user(&thinned, params)
                            .and_then(|u| home_at(&u.macros, w.start, w.end));
                        acc.0 += (home == Some(a.home)) as u64;
                        acc.1 += 1;
                    }
                    acc
                })
                .reduce(|| (0, 0, 0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));
            out.push(point(delta, omega, hits, n, skipped));
        }
    }
    out
}

/// Share of planted events lying inside the retained window that are
/// matched by a detected migration at the same destination covering at
/// least half of the event's days.
pub fn migration_recall(
    agents: &[AgentTruth],
    delta: i32,
    omegas: &[f64],
    seeds: &[u64],
    params: &DetectionParams,
) -> Vec<AccuracyPoint> {
    omegas
        .iter()
        .map(|&omega| {
            let (hits, n, skipped) = agents
                .par_iter()
                .enumerate()
                .filter(|(_, a)| !a.events.is_empty())
                .map(|(i, a)| {
                    let daily = a.daily();
                    let mut acc = (0u64, 0u64, 0u64);
                    for (si, &seed) in seeds.iter().enumerate() {
                        let plan = ThinningPlan { delta_days: delta, omega, seed };
                        let Some((w, thinned)) = thin(&daily, &plan, stream(i, si)) else {
                            acc.2 += 1;
                            continue;
                        };
                        let detected = detect_user(&thinned, params)
                            .map(|u| classify(&u.meso, params.tau_min_days))
                            .unwrap_or_default();
                        for e in a.events.iter().filter(|e| w.contains(e.start) && w.contains(e.end)) {
                            acc.1 += 1;
                            let found = detected.iter().any(|m| {
                                m.destination == e.cell
                                    && 2 * overlap_len((m.start, m.end), (e.start, e.end)) >= e.len()
                            });
                            acc.0 += found as u64;
                        }
                    }
                    acc
                })
                .reduce(|| (0, 0, 0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));
            point(delta, omega, hits, n, skipped)
        })
        .collect()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Population and density of one cell, for bias measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPopulation {
    pub cell: CellId,
    pub pop: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasPoint {
    pub constraints: FilterConstraints,
    pub users: usize,
    /// Capital share of users over capital share of population.
    pub capital_bias: f64,
    /// Share of users in each of ten density bins holding 10% of the population each.
    pub density_bins: [f64; 10],
}

/// Bin of each cell when cells sorted by density are cut into ten bins of
/// equal population (a cell goes where its population midpoint falls).
pub fn density_bins(cells: &[CellPopulation]) -> HashMap<CellId, usize> {
    let mut sorted = cells.to_vec();
    sorted.sort_by(|a, b| a.density.total_cmp(&b.density).then(a.cell.cmp(&b.cell)));
    let total: f64 = sorted.iter().map(|c| c.pop).sum();
    let mut cum = 0.0;
    let mut out = HashMap::new();
    for c in sorted {
        let mid = cum + c.pop / 2.0;
        let b = if total > 0.0 { ((mid / total) * 10.0).floor() as usize } else { 0 };
        out.insert(c.cell, b.min(9));
        cum += c.pop;
    }
    out
}

pub fn bias_surfaces(
    profiles: &[ObservationProfile],
    homes: &HashMap<String, CellId>,
    grid: &[FilterConstraints],
    cells: &[CellPopulation],
    capital: &[CellId],
) -> Vec<BiasPoint> {
    let total_pop: f64 = cells.iter().map(|c| c.pop).sum();
    let cap_pop: f64 = cells.iter().filter(|c| capital.contains(&c.cell)).map(|c| c.pop).sum();
    let bins = density_bins(cells);
    grid.iter()
        .map(|c| {
            let kept: Vec<CellId> = profiles
                .iter()
                .filter(|p| c.accepts(p))
                .filter_map(|p| homes.get(&p.user_id).copied())
                .collect();
            let n = kept.len();
            let mut hist = [0.0; 10];
            let mut at_cap = 0usize;
            for h in &kept {
                if let Some(&b) = bins.get(h) {
                    hist[b] += 1.0;
                }
                at_cap += capital.contains(h) as usize;
            }
            if n > 0 {
                for v in &mut hist {
                    *v /= n as f64;
                }
            }
            let capital_bias = if n == 0 || cap_pop == 0.0 {
                f64::NAN
            } else {
                (at_cap as f64 / n as f64) / (cap_pop / total_pop)
            };
            BiasPoint {
                constraints: *c,
                users: n,
                capital_bias,
                density_bins: hist,
            }
        })
        .collect()
}

/// Grid of a validation run, read from `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationGrid {
    pub deltas: Vec<i32>,
    pub omegas: Vec<f64>,
    pub recall_delta: i32,
    pub recall_omegas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub min_span: Vec<i32>,
    pub min_frac: Vec<f64>,
    pub max_gap: Vec<i32>,
}

impl Default for ValidationGrid {
    fn default() -> Self {
        ValidationGrid {
            deltas: vec![30, 60, 90, 120, 150, 180, 210, 240, 270, 300, 330, 360],
            omegas: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            recall_delta: 360,
            recall_omegas: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            seeds: (0..10).collect(),
            min_span: vec![250, 290, 330],
            min_frac: vec![0.5, 0.65, 0.8],
            max_gap: vec![15, 25],
        }
    }
}

fn list<T: std::str::FromStr>(k: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::config(format!("grid key `{k}`: bad value `{x}`")))
        })
        .collect()
}

impl ValidationGrid {
    pub fn parse(text: &str) -> Result<ValidationGrid> {
        let mut g = ValidationGrid::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("grid line `{line}`: expected key=value")))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "deltas" => g.deltas = list(k, v)?,
                "omegas" => g.omegas = list(k, v)?,
                "recall_delta" => g.recall_delta = list(k, v)?.first().copied().unwrap_or(360),
                "recall_omegas" => g.recall_omegas = list(k, v)?,
                "seeds" => {
                    let n: u64 = v.parse().map_err(|_| Error::config("grid key `seeds`: expected a count"))?;
                    g.seeds = (0..n).collect();
                }
                "min_span" => g.min_span = list(k, v)?,
                "min_frac" => g.min_frac = list(k, v)?,
                "max_gap" => g.max_gap = list(k, v)?,
                _ => return Err(Error::config(format!("unknown grid key `{k}`"))),
            }
        }
        if g.omegas.iter().chain(&g.recall_omegas).any(|&o| !(o > 0.0 && o <= 1.0)) {
            return Err(Error::config("omegas must lie in (0, 1]"));
        }
        if g.deltas.iter().any(|&d| d < 1) || g.seeds.is_empty() {
            return Err(Error::config("deltas must be positive and seeds non-zero"));
        }
        Ok(g)
    }

    pub fn constraints(&self) -> Vec<FilterConstraints> {
        let mut out = Vec::new();
        for &s in &self.min_span {
            for &f in &self.min_frac {
                for &g in &self.max_gap {
                    out.push(FilterConstraints {
                        min_span_days: s,
                        min_frac_observed: f,
                        max_gap_days: g,
                    });
                }
            }
        }
        out
    }
}

/// Writes accuracy points as a Δ-by-Ω matrix.
pub fn write_matrix(path: &Path, points: &[AccuracyPoint]) -> Result<()> {
    let mut deltas: Vec<i32> = points.iter().map(|p| p.delta_days).collect();
    deltas.sort_unstable();
    deltas.dedup();
    let mut omegas: Vec<f64> = points.iter().map(|p| p.omega).collect();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    let mut w = io::csv_writer(path)?;
    let mut head = vec!["delta_days".to_string()];
    head.extend(omegas.iter().map(|o| format!("omega_{o}")));
    w.write_record(&head)?;
    for d in deltas {
        let mut row = vec![d.to_string()];
        for o in &omegas {
            let v = points
                .iter()
                .find(|p| p.delta_days == d && p.omega == *o)
                .map(|p| if p.value.is_nan() { String::new() } else { format!("{:.6}", p.value) })
                .unwrap_or_default();
            row.push(v);
        }
        w.write_record(&row)?;
    }
    io::finish_csv(path, w)
}

pub fn write_bias(path: &Path, points: &[BiasPoint]) -> Result<()> {
    let mut w = io::csv_writer(path)?;
    let mut head: Vec<String> = ["min_span_days", "min_frac_observed", "max_gap_days", "users", "capital_bias"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    head.extend((1..=10).map(|b| format!("density_bin_{b}")));
    w.write_record(&head)?;
    for p in points {
        let mut row = vec![
            p.constraints.min_span_days.to_string(),
            p.constraints.min_frac_observed.to_string(),
            p.constraints.max_gap_days.to_string(),
            p.users.to_string(),
            if p.capital_bias.is_nan() { String::new() } else { format!("{:.6}", p.capital_bias) },
        ];
        row.extend(p.density_bins.iter().map(|v| format!("{v:.6}")));
        w.write_record(&row)?;
    }
    io::finish_csv(path, w)
}

/// Reports of one validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub home_accuracy: Vec<AccuracyPoint>,
    pub migration_recall: Vec<AccuracyPoint>,
    pub bias: Vec<BiasPoint>,
}

/// Runs every experiment of `grid` on the scenario's agents. Bias surfaces
/// use planted homes and the capital is cell 0.
pub fn run(cfg: &ScenarioConfig, grid: &ValidationGrid, params: &DetectionParams) -> Result<ValidationReport> {
    let agents = super::generate(cfg)?;
    let seeds: Vec<u64> = grid.seeds.iter().map(|s| cfg.seed.wrapping_add(*s)).collect();
    let home_accuracy = home_accuracy(&agents, &grid.deltas, &grid.omegas, &seeds, params);
    let migration_recall = migration_recall(&agents, grid.recall_delta, &grid.recall_omegas, &seeds, params);
    let profiles: Vec<ObservationProfile> = agents
        .iter()
        .filter_map(|a| {
            let days: Vec<_> = a.days.iter().map(|d| d.0).collect();
            profile(&a.user_id, a.n_records(), &days)
        })
        .collect();
    let homes: HashMap<String, CellId> = agents.iter().map(|a| (a.user_id.clone(), a.home)).collect();
    let cells: Vec<CellPopulation> = (0..cfg.cells as CellId)
        .map(|c| CellPopulation {
            cell: c,
            pop: super::cell_population(cfg, c),
            density: super::cell_density(cfg, c),
        })
        .collect();
    let bias = bias_surfaces(&profiles, &homes, &grid.constraints(), &cells, &[0]);
    Ok(ValidationReport {
        home_accuracy,
        migration_recall,
        bias,
    })
}

impl ValidationReport {
    /// Writes `home_accuracy.csv`, `migration_recall.csv` and `bias_surface.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_matrix(&dir.join("home_accuracy.csv"), &self.home_accuracy)?;
        write_matrix(&dir.join("migration_recall.csv"), &self.migration_recall)?;
        write_bias(&dir.join("bias_surface.csv"), &self.bias)
    }
}
