//! Independent verifiers.
//!
//! * [`truth_counts`] reads flows and stocks straight off planted events,
//!   without any segmentation.
//! * [`enumerate`] decides an outcome by trying every admissible pair of
//!   true start and end days around each stay and gap, instead of the
//!   closed-form window arithmetic used by the pipeline.

use crate::aggregation::{AggregationParams, CellCounts, Measure};
use crate::calendar::HalfMonth;
use crate::network::CellId;
use crate::segmentation::MesoSegment;

use super::AgentTruth;

/// Counts computed from ground truth for fully observed agents: everyone is
/// observed, and an event of at least `tau_min` days departs in the
/// half-month of its first day, returns in that of its last day, and is a
/// stock wherever it covers at least `sigma` days.
pub fn truth_counts(agents: &[AgentTruth], periods: &[HalfMonth], p: &AggregationParams) -> CellCounts {
    let mut c = CellCounts::default();
    for a in agents {
        c.users += 1;
        for &t in periods {
            c.observed.insert_or_add((t, a.home), [1, 1, 1]);
            for e in a.events.iter().filter(|e| e.len() >= p.tau_min_days) {
                let mut n = [0u64; 3];
                n[Measure::Depart.index()] = t.contains(e.start) as u64;
                n[Measure::Return.index()] = t.contains(e.end) as u64;
                let ov = crate::calendar::overlap_len((e.start, e.end), t.bounds());
                n[Measure::Stock.index()] = (ov >= p.sigma_days) as u64;
                if n.iter().any(|&x| x > 0) {
                    let slot = c.events.entry((t, a.home, e.cell)).or_default();
                    for conf in slot.iter_mut() {
                        for i in 0..3 {
                            conf[i] += n[i];
                        }
                    }
                }
            }
        }
    }
    c
}

trait InsertOrAdd<K> {
    fn insert_or_add(&mut self, k: K, v: [u64; 3]);
}

impl<K: Ord> InsertOrAdd<K> for std::collections::BTreeMap<K, [u64; 3]> {
    fn insert_or_add(&mut self, k: K, v: [u64; 3]) {
        let e = self.entry(k).or_default();
        for i in 0..3 {
            e[i] += v[i];
        }
    }
}

/// Outcome found by enumeration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub observed: bool,
    pub high: Vec<CellId>,
    pub low: Vec<CellId>,
}

fn push(v: &mut Vec<CellId>, c: CellId) {
    if !v.contains(&c) {
        v.push(c);
    }
}

/// Whether some `s` in `starts` and `e` in `ends` with `s <= e` satisfy `ok`.
fn exists(starts: (i32, i32), ends: (i32, i32), ok: impl Fn(i32, i32) -> bool) -> bool {
    (starts.0..=starts.1).any(|s| (ends.0.max(s)..=ends.1).any(|e| ok(s, e)))
}

fn ovl(s: i32, e: i32, ts: i32, te: i32) -> i32 {
    (e.min(te) - s.max(ts) + 1).max(0)
}

/// Day-level enumeration of one (user, half-month, measure) outcome from
/// annotated segments. Unbounded sides are cut `tau + 40` days beyond the
/// half-month, which is more than any admissible window needs.
pub fn enumerate(meso: &[MesoSegment], t: HalfMonth, measure: Measure, p: &AggregationParams) -> Outcome {
    let (ts, te) = (t.start().0, t.end().0);
    let tau = p.tau_min_days;
    let pad = tau + 40;
    let (far_l, far_r) = (ts - pad, te + pad);
    let in_t = |d: i32| ts <= d && d <= te;
    let segs: Vec<(CellId, i32, i32, bool)> = meso
        .iter()
        .map(|m| (m.cell, m.start.0, m.end.0, m.is_home()))
        .collect();
    let n = segs.len();
    // admissible bounds: `None` on the open side of the sample
    let lo = |i: usize, k: i32| -> Option<i32> {
        let prev = segs.get(i.checked_sub(1)?)?;
        Some(if prev.0 == segs[i].0 { prev.2 + k } else { prev.2 + 1 })
    };
    let hi = |i: usize, k: i32| -> Option<i32> {
        let next = segs.get(i + 1)?;
        Some(if next.0 == segs[i].0 { next.1 - k } else { next.1 - 1 })
    };
    let mut gaps: Vec<(i32, i32)> = Vec::new();
    if n == 0 {
        gaps.push((far_l, far_r));
    } else {
        gaps.push((far_l.min(segs[0].1 - 1), segs[0].1 - 1));
        for w in segs.windows(2) {
            if w[1].1 > w[0].2 + 1 {
                gaps.push((w[0].2 + 1, w[1].1 - 1));
            }
        }
        gaps.push((segs[n - 1].2 + 1, far_r.max(segs[n - 1].2 + 1)));
    }
    let k1 = p.eps_gap_meso_days + 1;
    let k2 = p.eps_gap_meso_days + 2;
    let mut out = Outcome::default();
    let mut unobserved = false;

    match measure {
        Measure::Depart => {
            for &(a, b) in &gaps {
                unobserved |= exists((a, b), (a, b), |s, e| in_t(s) && e - s + 1 >= tau);
            }
            for i in 0..n {
                let (cell, gs, ge, home) = segs[i];
                if home {
                    continue;
                }
                let ends = (ge, hi(i, k1).unwrap_or(ge));
                if in_t(gs) {
                    let starts = (lo(i, k1).unwrap_or(far_l), gs);
                    let tolerated = i > 0 && (segs[i - 1].2 >= ts || ts - segs[i - 1].2 - 1 <= p.eps_tol_days);
                    let fits = exists(starts, ends, |s, e| in_t(s) && e - s + 1 >= tau);
                    if tolerated {
                        if ge - gs + 1 >= tau {
                            push(&mut out.high, cell);
                        } else if fits {
                            push(&mut out.low, cell);
                        }
                    } else {
                        unobserved |= fits;
                    }
                } else if gs > te {
                    let starts = (lo(i, k2).unwrap_or(far_l), gs);
                    unobserved |= exists(starts, ends, |s, e| in_t(s) && e - s + 1 >= tau);
                }
            }
        }
        Measure::Return => {
            for &(a, b) in &gaps {
                unobserved |= exists((a, b), (a, b), |s, e| in_t(e) && e - s + 1 >= tau);
            }
            for i in 0..n {
                let (cell, gs, ge, home) = segs[i];
                if home {
                    continue;
                }
                let starts = (lo(i, k1).unwrap_or(gs), gs);
                if in_t(ge) {
                    let tolerated = i + 1 < n && (segs[i + 1].1 <= te || segs[i + 1].1 - te - 1 <= p.eps_tol_days);
                    if tolerated {
                        let ends = (ge, hi(i, k1).unwrap_or(far_r));
                        if ge - gs + 1 >= tau {
                            push(&mut out.high, cell);
                        } else if exists(starts, ends, |s, e| in_t(e) && e - s + 1 >= tau) {
                            push(&mut out.low, cell);
                        }
                    } else {
                        let ends = (ge, hi(i, k2).unwrap_or(far_r));
                        unobserved |= exists(starts, ends, |s, e| in_t(e) && e - s + 1 >= tau);
                    }
                } else if ge < ts {
                    let ends = (ge, hi(i, k2).unwrap_or(far_r));
                    unobserved |= exists(starts, ends, |s, e| in_t(e) && e - s + 1 >= tau);
                }
            }
        }
        Measure::Stock => {
            let sigma = p.sigma_days;
            let certain = segs.iter().any(|s| ovl(s.1, s.2, ts, te) >= sigma);
            let mut best_high: Option<(i32, CellId)> = None;
            let mut best_low: Option<(i32, CellId)> = None;
            for i in 0..n {
                let (cell, gs, ge, home) = segs[i];
                let ov = ovl(gs, ge, ts, te);
                if home {
                    continue;
                }
                let lo1 = lo(i, k1).unwrap_or(gs);
                let hi1 = hi(i, k1).unwrap_or(ge);
                if ov >= sigma {
                    if ge - gs + 1 >= tau {
                        if best_high.is_none_or(|(b, _)| ov > b) {
                            best_high = Some((ov, cell));
                        }
                    } else if exists((lo1, gs), (ge, hi1), |s, e| e - s + 1 >= tau)
                        && best_low.is_none_or(|(b, _)| ov > b)
                    {
                        best_low = Some((ov, cell));
                    }
                } else if !certain {
                    let starts = if gs >= ts { (lo1.max(ts), gs) } else { (lo1, gs) };
                    let ends = if ge <= te { (ge, hi1.min(te)) } else { (ge, hi1) };
                    unobserved |= exists(starts, ends, |s, e| e - s + 1 >= tau && ovl(s, e, ts, te) >= sigma);
                }
            }
            if !certain {
                for &(a, b) in &gaps {
                    unobserved |= exists((a, b), (a, b), |s, e| e - s + 1 >= tau && ovl(s, e, ts, te) >= sigma);
                }
            }
            match (best_high, best_low) {
                (Some((_, c)), _) => out.high.push(c),
                (None, Some((_, c))) => out.low.push(c),
                _ => {}
            }
        }
    }
    out.observed = !unobserved;
    out
}
