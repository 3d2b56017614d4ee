use crate::calendar::Day;
use crate::network::CellId;

use super::{DetectionParams, MesoSegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Span {
    pub cell: CellId,
    pub start: Day,
    pub end: Day,
}

/// Sub-step (i): consecutive observed days at one cell, with up to `eps`
/// unobserved days between two of them. Any day seen elsewhere ends the run.
pub(crate) fn runs(daily: &[(Day, CellId)], eps: i32) -> Vec<Span> {
    let mut out: Vec<Span> = Vec::new();
    for &(d, cell) in daily {
        match out.last_mut() {
            Some(s) if s.cell == cell && d - s.end - 1 <= eps => s.end = d,
            _ => out.push(Span {
                cell,
                start: d,
                end: d,
            }),
        }
    }
    out
}

/// Sub-step (ii): same-cell runs less than `eps` days apart are chained
/// together, possibly across stays elsewhere.
pub(crate) fn merge_runs(runs: &[Span], eps: i32) -> Vec<Span> {
    let mut cells: Vec<CellId> = runs.iter().map(|s| s.cell).collect();
    cells.sort_unstable();
    cells.dedup();
    let mut out = Vec::new();
    for cell in cells {
        let mut cur: Option<Span> = None;
        for s in runs.iter().filter(|s| s.cell == cell) {
            cur = match cur {
                Some(mut c) if s.start - c.end - 1 < eps => {
                    c.end = c.end.max(s.end);
                    Some(c)
                }
                Some(c) => {
                    out.push(c);
                    Some(*s)
                }
                None => Some(*s),
            };
        }
        out.extend(cur);
    }
    out.sort_by_key(|s| (s.start, std::cmp::Reverse(s.end), s.cell));
    out
}

/// Share of observed days in `[start, end]` spent at `cell`.
pub(crate) fn frac_at(daily: &[(Day, CellId)], s: &Span) -> f64 {
    let lo = daily.partition_point(|&(d, _)| d < s.start);
    let hi = daily.partition_point(|&(d, _)| d <= s.end);
    let window = &daily[lo..hi];
    if window.is_empty() {
        return 0.0;
    }
    let at = window.iter().filter(|&&(_, c)| c == s.cell).count();
    at as f64 / window.len() as f64
}

/// Sub-step (iii): segments contained in another one are dropped, partial
/// overlaps are split in the middle (the earlier segment keeps the extra
/// day of an odd overlap). Repeats until segments are disjoint.
pub(crate) fn resolve_overlaps(mut segs: Vec<Span>) -> Vec<Span> {
    loop {
        segs.sort_by_key(|s| (s.start, std::cmp::Reverse(s.end), s.cell));
        let mut changed = false;
        let mut kept: Vec<Span> = Vec::with_capacity(segs.len());
        for s in segs {
            match kept.last() {
                Some(k) if s.end <= k.end => changed = true,
                _ => kept.push(s),
            }
        }
        segs = kept;
        for i in 1..segs.len() {
            let (a, b) = (segs[i - 1], segs[i]);
            if b.start <= a.end {
                let n = a.end - b.start + 1;
                let first_end = b.start + (n + 1) / 2 - 1;
                segs[i - 1].end = first_end;
                segs[i].start = first_end.succ();
                changed = true;
            }
        }
        segs.retain(|s| s.start <= s.end);
        if !changed {
            return segs;
        }
    }
}

/// Stays detected from the daily series, sorted and disjoint. Duration
/// and home attributes are filled in by [`super::annotate`].
pub fn detect_meso(daily: &[(Day, CellId)], params: &DetectionParams) -> Vec<MesoSegment> {
    let eps = params.eps_gap_meso_days;
    let merged = merge_runs(&runs(daily, eps), eps);
    let filtered: Vec<Span> = merged
        .into_iter()
        .filter(|s| frac_at(daily, s) >= params.phi)
        .collect();
    resolve_overlaps(filtered)
        .into_iter()
        .map(|s| MesoSegment {
            cell: s.cell,
            start: s.start,
            end: s.end,
            min_dur: s.end - s.start + 1,
            max_dur: s.end - s.start + 1,
            macro_cell: s.cell,
            frac: frac_at(daily, &s),
        })
        .collect()
}
