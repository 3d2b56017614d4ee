use crate::calendar::{overlap_len, Day};
use crate::network::CellId;

use super::{MacroSegment, MesoSegment};

/// Macro segment giving the home context of `[start, end]`: the one covering
/// it, else the one overlapping it most (earliest on ties), else the
/// nearest one in time (earliest on ties).
pub fn macro_for(macros: &[MacroSegment], start: Day, end: Day) -> Option<&MacroSegment> {
    let mut best: Option<(&MacroSegment, i32)> = None;
    for m in macros {
        let ov = overlap_len((m.start, m.end), (start, end));
        if ov > 0 && best.is_none_or(|(_, b)| ov > b) {
            best = Some((m, ov));
        }
    }
    if let Some((m, _)) = best {
        return Some(m);
    }
    let distance = |m: &MacroSegment| {
        if m.end < start {
            start - m.end
        } else {
            m.start - end
        }
    };
    let mut nearest: Option<(&MacroSegment, i32)> = None;
    for m in macros {
        let d = distance(m);
        if nearest.is_none_or(|(_, b)| d < b) {
            nearest = Some((m, d));
        }
    }
    nearest.map(|(m, _)| m)
}

/// Home cell active during `[start, end]`.
pub fn home_at(macros: &[MacroSegment], start: Day, end: Day) -> Option<CellId> {
    macro_for(macros, start, end).map(|m| m.cell)
}

/// Fills duration bounds and home context. The maximum duration runs from
/// the day after the previous observed day to the day before the next
/// one; with no observation on a side the observed bound is used.
pub fn annotate(
    meso: &[MesoSegment],
    daily: &[(Day, CellId)],
    macros: &[MacroSegment],
) -> Vec<MesoSegment> {
    meso.iter()
        .map(|s| {
            let before = daily.partition_point(|&(d, _)| d < s.start);
            let after = daily.partition_point(|&(d, _)| d <= s.end);
            let lo = if before > 0 { daily[before - 1].0.succ() } else { s.start };
            let hi = if after < daily.len() { daily[after].0.pred() } else { s.end };
            let macro_cell = home_at(macros, s.start, s.end).unwrap_or(s.cell);
            MesoSegment {
                min_dur: s.end - s.start + 1,
                max_dur: hi - lo + 1,
                macro_cell,
                ..*s
            }
        })
        .collect()
}
