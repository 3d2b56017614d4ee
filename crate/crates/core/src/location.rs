//! Hourly, daily and monthly modal locations.

use std::collections::BTreeMap;

use crate::calendar::{civil_day_hour, Day, Month};
use crate::network::CellId;

/// First hour of the evening part of a day's night window.
pub const NIGHT_START: u8 = 18;
/// Hours before this on day d+1 still belong to day d's night.
pub const NIGHT_END: u8 = 8;

pub const MIN_MONTH_DAYS: usize = 10;

/// Most frequent cell, ties to the smallest id. `None` on empty input.
pub fn mode_cell<I: IntoIterator<Item = CellId>>(cells: I) -> Option<CellId> {
    let mut counts: BTreeMap<CellId, u32> = BTreeMap::new();
    for c in cells {
        *counts.entry(c).or_default() += 1;
    }
    mode_of_counts(counts)
}

/// Mode over `(cell, count)` pairs; repeated cells are summed.
pub fn mode_of_counts<I: IntoIterator<Item = (CellId, u32)>>(counts: I) -> Option<CellId> {
    let mut acc: BTreeMap<CellId, u64> = BTreeMap::new();
    for (c, n) in counts {
        *acc.entry(c).or_default() += n as u64;
    }
    // BTreeMap iterates ascending, so strict `>` keeps the smallest id on ties.
    let mut best: Option<(CellId, u64)> = None;
    for (c, n) in acc {
        if n > 0 && best.is_none_or(|(_, b)| n > b) {
            best = Some((c, n));
        }
    }
    best.map(|(c, _)| c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HourlyLocation {
    pub day: Day,
    pub hour: u8,
    pub cell: CellId,
}

/// Modal cell per (day, hour) from `(timestamp, cell)` events in any order.
pub fn hourly(events: &[(i64, CellId)], utc_offset_secs: i32) -> Vec<HourlyLocation> {
    let mut slots: BTreeMap<(Day, u8), Vec<(CellId, u32)>> = BTreeMap::new();
    for &(ts, cell) in events {
        let (day, hour) = civil_day_hour(ts, utc_offset_secs);
        bump(slots.entry((day, hour)).or_default(), cell, 1);
    }
    hourly_from_counts(slots)
}

pub(crate) fn bump(counts: &mut Vec<(CellId, u32)>, cell: CellId, by: u32) {
    match counts.iter_mut().find(|(c, _)| *c == cell) {
        Some((_, n)) => *n += by,
        None => counts.push((cell, by)),
    }
}

/// Hourly modes from already-folded per-hour counts, sorted by (day, hour).
pub fn hourly_from_counts<I>(slots: I) -> Vec<HourlyLocation>
where
    I: IntoIterator<Item = ((Day, u8), Vec<(CellId, u32)>)>,
{
    let mut out: Vec<HourlyLocation> = slots
        .into_iter()
        .filter_map(|((day, hour), counts)| {
            mode_of_counts(counts).map(|cell| HourlyLocation { day, hour, cell })
        })
        .collect();
    out.sort_unstable();
    out
}

/// Daily locations, sorted by day. Observed days are those with at least
/// one hourly entry in their night window (18-23 of d, 0-7 of d+1) or,
/// failing that, in 8-17 of d.
pub type DailySeries = Vec<(Day, CellId)>;

pub fn daily(hourly: &[HourlyLocation]) -> DailySeries {
    let mut night: BTreeMap<Day, Vec<CellId>> = BTreeMap::new();
    let mut daytime: BTreeMap<Day, Vec<CellId>> = BTreeMap::new();
    for h in hourly {
        if h.hour >= NIGHT_START {
            night.entry(h.day).or_default().push(h.cell);
        } else if h.hour < NIGHT_END {
            night.entry(h.day.pred()).or_default().push(h.cell);
        } else {
            daytime.entry(h.day).or_default().push(h.cell);
        }
    }
    let mut out: BTreeMap<Day, CellId> = BTreeMap::new();
    for (d, cells) in daytime {
        if !night.contains_key(&d) {
            out.insert(d, mode_cell(cells).expect("nonempty"));
        }
    }
    for (d, cells) in night {
        out.insert(d, mode_cell(cells).expect("nonempty"));
    }
    out.into_iter().collect()
}

pub type MonthlySeries = Vec<(Month, CellId)>;

/// Modal daily cell for months with at least `min_days` observed days.
pub fn monthly(daily: &[(Day, CellId)], min_days: usize) -> MonthlySeries {
    let mut by_month: BTreeMap<Month, Vec<CellId>> = BTreeMap::new();
    for &(d, c) in daily {
        by_month.entry(d.month_key()).or_default().push(c);
    }
    by_month
        .into_iter()
        .filter(|(_, cells)| cells.len() >= min_days)
        .map(|(m, cells)| (m, mode_cell(cells).expect("nonempty")))
        .collect()
}

/// Mode of the daily series.
pub fn preliminary_home(daily: &[(Day, CellId)]) -> Option<CellId> {
    mode_cell(daily.iter().map(|&(_, c)| c))
}
