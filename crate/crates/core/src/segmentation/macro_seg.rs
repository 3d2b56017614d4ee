use crate::calendar::{Day, Month};
use crate::location::{preliminary_home, MonthlySeries};
use crate::network::CellId;

use super::{DetectionParams, MacroSegment};

/// Month-index interval `[first, last]` at one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Group {
    cell: CellId,
    first: i32,
    last: i32,
}

impl Group {
    fn days(&self) -> i32 {
        Month::from_index(self.last).last_day() - Month::from_index(self.first).first_day() + 1
    }
}

/// Sub-step (ii): runs of defined months at one cell, tolerating up to
/// `eps` undefined months between two consecutive defined ones.
fn contiguous_groups(monthly: &MonthlySeries, eps: i32) -> Vec<Group> {
    let mut out: Vec<Group> = Vec::new();
    for &(m, cell) in monthly {
        let idx = m.index();
        match out.last_mut() {
            Some(g) if g.cell == cell && idx - g.last - 1 <= eps => g.last = idx,
            _ => out.push(Group {
                cell,
                first: idx,
                last: idx,
            }),
        }
    }
    out
}

/// Sub-step (iii): a group absorbs the next group at the same cell when
/// the groups separating them last fewer than `tau_max` days in total.
/// Absorbed groups keep their own identity so overlaps can be resolved.
fn merge_groups(groups: &[Group], tau_max: i32) -> Vec<Group> {
    let n = groups.len();
    let mut merged_into: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let Some(j) = (i + 1..n).find(|&j| groups[j].cell == groups[i].cell) else {
            continue;
        };
        if j == i + 1 {
            continue;
        }
        let between: i32 = groups[i + 1..j].iter().map(Group::days).sum();
        if between < tau_max {
            merged_into[j] = merged_into[i];
        }
    }
    let mut out: Vec<Group> = Vec::new();
    let mut slot: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let root = merged_into[i];
        match slot[root] {
            Some(k) => out[k].last = groups[i].last,
            None => {
                slot[root] = Some(out.len());
                out.push(groups[i]);
            }
        }
    }
    out.sort_by_key(|g| (g.first, g.last, g.cell));
    out
}

/// Sub-step (iv): drop short groups, then give months shared by two
/// neighbours to the longer one (earlier wins ties), scanning left to
/// right until nothing overlaps.
fn resolve_overlaps(mut groups: Vec<Group>, tau_max: i32) -> Vec<Group> {
    groups.retain(|g| g.days() >= tau_max);
    loop {
        let Some(i) = (1..groups.len()).find(|&i| groups[i].first <= groups[i - 1].last) else {
            return groups;
        };
        let (a, b) = (groups[i - 1], groups[i]);
        if a.days() >= b.days() {
            groups[i].first = a.last + 1;
        } else {
            groups[i - 1].last = b.first - 1;
        }
        groups.retain(|g| g.first <= g.last && g.days() >= tau_max);
        groups.sort_by_key(|g| (g.first, g.last, g.cell));
    }
}

/// Home periods. With fewer than two surviving groups the user gets a
/// single period at the preliminary home covering the whole observation.
pub fn detect_macro(
    monthly: &MonthlySeries,
    daily: &[(Day, CellId)],
    params: &DetectionParams,
) -> Vec<MacroSegment> {
    let (Some(first), Some(last)) = (daily.first(), daily.last()) else {
        return Vec::new();
    };
    let groups = contiguous_groups(monthly, params.eps_gap_macro_months);
    let groups = merge_groups(&groups, params.tau_max_days);
    let groups = resolve_overlaps(groups, params.tau_max_days);
    if groups.len() <= 1 {
        let home = preliminary_home(daily).expect("nonempty daily series");
        return vec![MacroSegment {
            cell: home,
            start: first.0,
            end: last.0,
        }];
    }
    groups
        .into_iter()
        .map(|g| MacroSegment {
            cell: g.cell,
            start: Month::from_index(g.first).first_day(),
            end: Month::from_index(g.last).last_day(),
        })
        .collect()
}
