use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::calendar::HalfMonth;
use crate::network::CellId;
use crate::segmentation::{home_at, UserSegments};

use super::{AggregationParams, Measure, Rule, Timeline, Verdict};

/// Per-user outcomes for every half-month, keyed by the home cell active
/// at that half-month.
#[derive(Debug, Clone, PartialEq)]
pub struct UserHistory {
    pub periods: Vec<(HalfMonth, CellId, [Verdict; 3])>,
}

impl UserHistory {
    pub fn evaluate(user: &UserSegments, periods: &[HalfMonth], params: &AggregationParams) -> Self {
        let timeline = Timeline::new(&user.meso);
        let periods = periods
            .iter()
            .filter_map(|&t| {
                let home = home_at(&user.macros, t.start(), t.end())?;
                let v = Measure::ALL.map(|m| timeline.evaluate(t, m, params));
                Some((t, home, v))
            })
            .collect();
        UserHistory { periods }
    }
}

/// Integer counts keyed by home cell. Summing is commutative, so partial
/// counts from any split of the users merge to the same value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellCounts {
    /// `(t, home cell)` -> observed users per measure.
    pub observed: BTreeMap<(HalfMonth, CellId), [u64; 3]>,
    /// `(t, home cell, destination cell)` -> counts per confidence, per measure.
    pub events: BTreeMap<(HalfMonth, CellId, CellId), [[u64; 3]; 2]>,
    pub rule_hits: BTreeMap<Rule, u64>,
    /// Same-destination events collapsed into one.
    pub duplicates: u64,
    pub users: u64,
}

impl CellCounts {
    pub fn add(&mut self, h: &UserHistory) {
        self.users += 1;
        for (t, home, verdicts) in &h.periods {
            for m in Measure::ALL {
                let v = &verdicts[m.index()];
                for r in &v.rules {
                    *self.rule_hits.entry(*r).or_default() += 1;
                }
                if !v.observed {
                    continue;
                }
                self.duplicates += v.duplicates as u64;
                self.observed.entry((*t, *home)).or_default()[m.index()] += 1;
                for (conf, with_low) in [(0, false), (1, true)] {
                    for d in v.destinations(with_low) {
                        self.events.entry((*t, *home, d)).or_default()[conf][m.index()] += 1;
                    }
                }
            }
        }
    }

    pub fn merge(mut self, other: CellCounts) -> CellCounts {
        for (k, v) in other.observed {
            let e = self.observed.entry(k).or_default();
            for i in 0..3 {
                e[i] += v[i];
            }
        }
        for (k, v) in other.events {
            let e = self.events.entry(k).or_default();
            for c in 0..2 {
                for i in 0..3 {
                    e[c][i] += v[c][i];
                }
            }
        }
        for (k, v) in other.rule_hits {
            *self.rule_hits.entry(k).or_default() += v;
        }
        self.duplicates += other.duplicates;
        self.users += other.users;
        self
    }
}

/// Evaluates every user over `periods` on the current rayon pool.
pub fn count_users(
    users: &[UserSegments],
    periods: &[HalfMonth],
    params: &AggregationParams,
) -> CellCounts {
    users
        .par_iter()
        .fold(CellCounts::default, |mut acc, u| {
            acc.add(&UserHistory::evaluate(u, periods, params));
            acc
        })
        .reduce(CellCounts::default, CellCounts::merge)
}
