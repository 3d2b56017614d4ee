//! Post-stratification weights: each observed user stands for
//! `pop / N_observed` people of its home stratum, per half-month and measure.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::aggregation::{CellCounts, Measure};
use crate::calendar::HalfMonth;
use crate::error::{Error, Result};
use crate::io;
use crate::network::{CellId, LocationNetwork, Zone};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StratumZone {
    Urban,
    RuralLowDensity,
    RuralHighDensity,
}

impl fmt::Display for StratumZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StratumZone::Urban => "urban",
            StratumZone::RuralLowDensity => "rural_low_density",
            StratumZone::RuralHighDensity => "rural_high_density",
        })
    }
}

impl FromStr for StratumZone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "urban" => Ok(StratumZone::Urban),
            "rural_low_density" => Ok(StratumZone::RuralLowDensity),
            "rural_high_density" => Ok(StratumZone::RuralHighDensity),
            _ => Err(Error::data(format!("unknown stratum zone `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub stratum_id: String,
    pub cells: Vec<CellId>,
    pub zone: StratumZone,
    /// Target population (over 15).
    pub pop: f64,
}

/// Per-cell inputs to stratum construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CellInfo {
    pub cell: CellId,
    pub zone: Zone,
    /// District of a rural cell; ignored for urban cells.
    pub district: String,
    pub pop_over_15: f64,
    pub density: Option<f64>,
}

/// Partition of cells into strata.
#[derive(Debug, Clone, PartialEq)]
pub struct Strata {
    pub strata: Vec<Stratum>,
    of_cell: HashMap<CellId, usize>,
}

impl Strata {
    pub fn new(mut strata: Vec<Stratum>) -> Result<Strata> {
        strata.sort_by(|a, b| a.stratum_id.cmp(&b.stratum_id));
        let mut of_cell = HashMap::new();
        for (i, s) in strata.iter().enumerate() {
            if !(s.pop >= 0.0) {
                return Err(Error::data(format!("stratum `{}` has negative population", s.stratum_id)));
            }
            for &c in &s.cells {
                if of_cell.insert(c, i).is_some() {
                    return Err(Error::data(format!("cell {c} belongs to two strata")));
                }
            }
        }
        Ok(Strata { strata, of_cell })
    }

    pub fn of(&self, cell: CellId) -> Option<usize> {
        self.of_cell.get(&cell).copied()
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    /// One stratum per cell region, zone taken from the network; used when
    /// no strata table is supplied. Population defaults to `default_pop`.
    pub fn from_regions(network: &LocationNetwork, default_pop: f64) -> Result<Strata> {
        let mut by_region: BTreeMap<&str, Stratum> = BTreeMap::new();
        for c in &network.cells {
            let s = by_region.entry(&c.region_id).or_insert_with(|| Stratum {
                stratum_id: c.region_id.clone(),
                cells: Vec::new(),
                zone: match c.zone {
                    Zone::Urban => StratumZone::Urban,
                    Zone::Rural => StratumZone::RuralLowDensity,
                },
                pop: default_pop,
            });
            s.cells.push(c.cell_id);
        }
        Strata::new(by_region.into_values().collect())
    }
}

/// Median of the rural cell densities (mean of the two middle values for
/// an even count).
pub fn rural_density_median(cells: &[CellInfo]) -> Option<f64> {
    let mut d: Vec<f64> = cells
        .iter()
        .filter(|c| c.zone == Zone::Rural)
        .filter_map(|c| c.density)
        .collect();
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    Some(if n % 2 == 1 {
        d[n / 2]
    } else {
        (d[n / 2 - 1] + d[n / 2]) / 2.0
    })
}

/// One stratum per urban cell, and per district a low- and a high-density
/// rural stratum split at `median` (strictly below goes low). Empty strata
/// are omitted; stratum population is the sum over its cells.
pub fn build_strata(cells: &[CellInfo], median: f64) -> Result<Strata> {
    let mut map: BTreeMap<String, Stratum> = BTreeMap::new();
    for c in cells {
        let (id, zone) = match c.zone {
            Zone::Urban => (format!("city_{}", c.cell), StratumZone::Urban),
            Zone::Rural => {
                let d = c
                    .density
                    .ok_or_else(|| Error::data(format!("rural cell {} has no density", c.cell)))?;
                if d < median {
                    (format!("{}_low", c.district), StratumZone::RuralLowDensity)
                } else {
                    (format!("{}_high", c.district), StratumZone::RuralHighDensity)
                }
            }
        };
        let s = map.entry(id.clone()).or_insert_with(|| Stratum {
            stratum_id: id,
            cells: Vec::new(),
            zone,
            pop: 0.0,
        });
        s.cells.push(c.cell);
        s.pop += c.pop_over_15;
    }
    Strata::new(map.into_values().collect())
}

const STRATA_COLUMNS: [&str; 5] = ["stratum_id", "cell_id", "zone", "pop_over_15", "density"];

/// Reads `stratum_id,cell_id,zone,pop_over_15,density`; population is per
/// cell and summed into the stratum.
pub fn read_strata(path: &Path) -> Result<Strata> {
    let mut r = io::csv_reader(path)?;
    let cols = io::columns(path, r.headers()?, &STRATA_COLUMNS)?;
    let mut map: BTreeMap<String, Stratum> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let id = rec[cols[0]].to_string();
        let cell: CellId = io::parse_field(path, line, &rec[cols[1]])?;
        let zone: StratumZone = rec[cols[2]]
            .parse()
            .map_err(|e: Error| io::parse_error(path, line, e.to_string()))?;
        let pop: f64 = io::parse_field(path, line, &rec[cols[3]])?;
        let s = map.entry(id.clone()).or_insert_with(|| Stratum {
            stratum_id: id.clone(),
            cells: Vec::new(),
            zone,
            pop: 0.0,
        });
        if s.zone != zone {
            return Err(io::parse_error(path, line, format!("stratum `{id}` mixes zones")));
        }
        s.cells.push(cell);
        s.pop += pop;
    }
    Strata::new(map.into_values().collect())
}

/// Writes one row per cell, splitting stratum population evenly.
pub fn write_strata(path: &Path, strata: &Strata) -> Result<()> {
    let mut w = io::csv_writer(path)?;
    w.write_record(STRATA_COLUMNS)?;
    for s in &strata.strata {
        let share = s.pop / s.cells.len().max(1) as f64;
        for c in &s.cells {
            w.write_record([
                s.stratum_id.clone(),
                c.to_string(),
                s.zone.to_string(),
                io::fmt_f64(share),
                String::new(),
            ])?;
        }
    }
    io::finish_csv(path, w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry<T> {
    pub n_observed: u64,
    pub weight: T,
}

/// Weights per (stratum index, half-month, measure); absent where nobody
/// from the stratum is observed.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable<T> {
    pub entries: BTreeMap<(usize, HalfMonth, Measure), WeightEntry<T>>,
    /// Observed users whose home cell is in no stratum.
    pub unstratified_users: u64,
}

impl<T: Scalar> WeightTable<T> {
    pub fn compute(strata: &Strata, counts: &CellCounts) -> Result<WeightTable<T>> {
        let mut n: BTreeMap<(usize, HalfMonth, Measure), u64> = BTreeMap::new();
        let mut unstratified = 0;
        for (&(t, home), obs) in &counts.observed {
            for m in Measure::ALL {
                let k = obs[m.index()];
                if k == 0 {
                    continue;
                }
                match strata.of(home) {
                    Some(s) => *n.entry((s, t, m)).or_default() += k,
                    None => unstratified += k,
                }
            }
        }
        let mut entries = BTreeMap::new();
        for (key, k) in n {
            let s = &strata.strata[key.0];
            let pop = T::from_population(s.pop).ok_or_else(|| {
                Error::data(format!("population of `{}` not representable", s.stratum_id))
            })?;
            entries.insert(
                key,
                WeightEntry {
                    n_observed: k,
                    weight: pop / T::from_count(k),
                },
            );
        }
        Ok(WeightTable {
            entries,
            unstratified_users: unstratified,
        })
    }

    pub fn weight(&self, strata: &Strata, cell: CellId, t: HalfMonth, m: Measure) -> Option<T> {
        let s = strata.of(cell)?;
        self.entries.get(&(s, t, m)).map(|e| e.weight)
    }

    /// Sum of weights over observed users for `(t, m)`.
    pub fn weighted_users(&self, t: HalfMonth, m: Measure) -> T {
        self.entries
            .iter()
            .filter(|((_, tt, mm), _)| *tt == t && *mm == m)
            .map(|(_, e)| e.weight * T::from_count(e.n_observed))
            .sum()
    }

    /// Population of strata with at least one observed user at `(t, m)`.
    pub fn covered_population(&self, strata: &Strata, t: HalfMonth, m: Measure) -> T {
        self.entries
            .keys()
            .filter(|(_, tt, mm)| *tt == t && *mm == m)
            .filter_map(|(s, _, _)| T::from_population(strata.strata[*s].pop))
            .sum()
    }

    pub fn write_csv(&self, path: &Path, strata: &Strata) -> Result<()> {
        let mut w = io::csv_writer(path)?;
        w.write_record(["stratum_id", "year", "month", "half", "measure", "n_observed", "pop", "weight"])?;
        for ((s, t, m), e) in &self.entries {
            let st = &strata.strata[*s];
            w.write_record([
                st.stratum_id.clone(),
                t.year.to_string(),
                t.month.to_string(),
                t.half.to_string(),
                m.to_string(),
                e.n_observed.to_string(),
                io::fmt_f64(st.pop),
                io::fmt_f64(e.weight.to_f64()),
            ])?;
        }
        io::finish_csv(path, w)
    }
}

/// Population of strata left without any observed user, per (t, measure).
pub fn coverage_shortfall<T: Scalar>(
    strata: &Strata,
    weights: &WeightTable<T>,
    periods: &[HalfMonth],
) -> BTreeMap<(HalfMonth, Measure), f64> {
    let total: f64 = strata.strata.iter().map(|s| s.pop).sum();
    let mut out = BTreeMap::new();
    for &t in periods {
        for m in Measure::ALL {
            let covered = weights.covered_population(strata, t, m).to_f64();
            out.insert((t, m), total - covered);
        }
    }
    out
}
