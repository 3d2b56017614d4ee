use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::calendar::HalfMonth;
use crate::error::Result;
use crate::io;
use crate::network::{CellId, LocationNetwork};
use crate::scalar::{ratio, Scalar};

use super::{CellCounts, Confidence, Measure};

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow<T> {
    pub origin: String,
    pub destination: String,
    pub t: HalfMonth,
    /// Departures, returns, migrants.
    pub n: [T; 3],
    pub observed: [T; 3],
}

impl<T: Scalar> TableRow<T> {
    /// `None` when nobody from the origin is observed for that measure.
    pub fn rate(&self, m: Measure) -> Option<T> {
        ratio(self.n[m.index()], self.observed[m.index()])
    }
}

/// Region-level counts for one confidence level, optionally weighted.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrationTable<T> {
    pub weighted: bool,
    pub rows: Vec<TableRow<T>>,
    /// Observed user contributions dropped because no weight was defined.
    pub unweighted_contributions: u64,
}

pub type Key = (HalfMonth, String);

impl<T: Scalar> MigrationTable<T> {
    /// Sums cell-level counts into regions. `weight` gives each user's
    /// contribution from its home cell at `t` for a measure; `None` drops it.
    /// One row per destination region is emitted for every (origin, t)
    /// with at least one observed user.
    pub fn tabulate<W>(
        counts: &CellCounts,
        network: &LocationNetwork,
        confidence: Confidence,
        weighted: bool,
        weight: W,
    ) -> MigrationTable<T>
    where
        W: Fn(CellId, HalfMonth, Measure) -> Option<T>,
    {
        let regions: BTreeSet<&str> = network.cells.iter().map(|c| c.region_id.as_str()).collect();
        let mut dropped = 0u64;
        let mut observed: BTreeMap<Key, [T; 3]> = BTreeMap::new();
        for (&(t, home), n) in &counts.observed {
            let e = observed
                .entry((t, network.region_of(home).to_string()))
                .or_insert([T::zero(); 3]);
            for m in Measure::ALL {
                let k = n[m.index()];
                if k == 0 {
                    continue;
                }
                match weight(home, t, m) {
                    Some(w) => e[m.index()] += w * T::from_count(k),
                    None => dropped += k,
                }
            }
        }
        let mut events: BTreeMap<(HalfMonth, &str, &str), [T; 3]> = BTreeMap::new();
        for (&(t, home, dest), n) in &counts.events {
            let e = events
                .entry((t, network.region_of(home), network.region_of(dest)))
                .or_insert([T::zero(); 3]);
            for m in Measure::ALL {
                let k = n[confidence.index()][m.index()];
                if k > 0 {
                    if let Some(w) = weight(home, t, m) {
                        e[m.index()] += w * T::from_count(k);
                    }
                }
            }
        }
        let mut rows = Vec::new();
        for ((t, origin), obs) in &observed {
            if obs.iter().all(|v| *v == T::zero()) {
                continue;
            }
            for &dest in &regions {
                let n = events
                    .get(&(*t, origin.as_str(), dest))
                    .copied()
                    .unwrap_or([T::zero(); 3]);
                rows.push(TableRow {
                    origin: origin.clone(),
                    destination: dest.to_string(),
                    t: *t,
                    n,
                    observed: *obs,
                });
            }
        }
        rows.sort_by(|a, b| (&a.origin, &a.destination, a.t).cmp(&(&b.origin, &b.destination, b.t)));
        MigrationTable {
            weighted,
            rows,
            unweighted_contributions: dropped,
        }
    }

    pub fn unweighted(counts: &CellCounts, network: &LocationNetwork, confidence: Confidence) -> Self {
        Self::tabulate(counts, network, confidence, false, |_, _, _| Some(T::one()))
    }

    /// Keeps only rows whose half-month is in `keep`.
    pub fn retain_periods(&mut self, keep: &[HalfMonth]) {
        let keep: BTreeSet<HalfMonth> = keep.iter().copied().collect();
        self.rows.retain(|r| keep.contains(&r.t));
    }

    pub fn periods(&self) -> BTreeSet<HalfMonth> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn header(weighted: bool) -> Vec<String> {
        let sfx = if weighted { "_adj" } else { "" };
        let mut h: Vec<String> = ["origin", "destination", "year", "month", "half"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for c in [
            "N_depart",
            "N_return",
            "N_migrants",
            "N_users_observed_depart",
            "N_users_observed_return",
            "N_users_observed_stock",
            "rate_depart",
            "rate_return",
            "rate_migrants",
        ] {
            h.push(format!("{c}{sfx}"));
        }
        h
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = io::csv_writer(path)?;
        w.write_record(Self::header(self.weighted))?;
        let num = |v: T| io::fmt_f64(v.to_f64());
        for r in &self.rows {
            let mut rec = vec![
                r.origin.clone(),
                r.destination.clone(),
                r.t.year.to_string(),
                r.t.month.to_string(),
                r.t.half.to_string(),
            ];
            rec.extend(r.n.iter().map(|&v| num(v)));
            rec.extend(r.observed.iter().map(|&v| num(v)));
            rec.extend(Measure::ALL.iter().map(|&m| r.rate(m).map(num).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        io::finish_csv(path, w)
    }
}
