//! Closed-form departure, return and stock rules for one user and one
//! time unit, including whether the user counts as observed.
//!
//! A user's meso segments split the line into observed stays and gaps.
//! For a segment G with previous segment P and next segment N:
//!
//! * earliest true start `lo(G, k)`: the day after P, or `k` days after P
//!   when P is at the same cell (the two would have merged otherwise);
//!   absent when G is the first segment (sample entry);
//! * latest true end `hi(G, k)`: symmetric, absent at sample exit.
//!
//! Every rule carries the number of the configuration it stands for so a
//! verdict can be traced back to the drawing it implements.

use smallvec::SmallVec;

use crate::calendar::HalfMonth;
use crate::network::CellId;
use crate::segmentation::MesoSegment;

use super::{AggregationParams, Measure};

const NEG_INF: i32 = i32::MIN / 4;
const POS_INF: i32 = i32::MAX / 4;

/// Rule that fired, with the configuration number within its family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    DepartHigh(u8),
    DepartLow(u8),
    ReturnHigh(u8),
    ReturnLow(u8),
    StockHigh(u8),
    StockLow(u8),
    DepartUnobserved(u8),
    ReturnUnobserved(u8),
    StockUnobserved(u8),
}

impl Rule {
    pub fn is_unobserved(self) -> bool {
        matches!(
            self,
            Rule::DepartUnobserved(_) | Rule::ReturnUnobserved(_) | Rule::StockUnobserved(_)
        )
    }
}

pub type Cells = SmallVec<[CellId; 2]>;

/// Outcome of one (user, time unit, measure).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Verdict {
    pub observed: bool,
    /// Destinations from high-confidence rules, deduplicated.
    pub high: Cells,
    /// Destinations from low-confidence rules, deduplicated.
    pub low: Cells,
    pub rules: SmallVec<[Rule; 4]>,
    /// Events dropped because the destination was already counted.
    pub duplicates: u32,
}

impl Verdict {
    /// Destinations counted at the requested confidence; empty when the
    /// user is not observed.
    pub fn destinations(&self, with_low: bool) -> Cells {
        if !self.observed {
            return Cells::new();
        }
        let mut out = self.high.clone();
        if with_low {
            for &c in &self.low {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        out
    }

    fn push(&mut self, high: bool, cell: CellId) {
        let list = if high { &mut self.high } else { &mut self.low };
        if list.contains(&cell) {
            self.duplicates += 1;
        } else {
            list.push(cell);
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Seg {
    cell: CellId,
    s: i32,
    e: i32,
    home: bool,
    min_dur: i32,
}

#[derive(Debug, Clone, Copy)]
struct Gap {
    a: i32,
    b: i32,
}

impl Gap {
    fn entry(&self) -> bool {
        self.a == NEG_INF
    }

    fn exit(&self) -> bool {
        self.b == POS_INF
    }
}

fn len(a: i32, b: i32) -> i32 {
    (b as i64 - a as i64 + 1).clamp(0, i32::MAX as i64) as i32
}

fn overlap(a: i32, b: i32, ts: i32, te: i32) -> i32 {
    len(a.max(ts), b.min(te))
}

/// Segments of one user, prepared for repeated evaluation over time units.
#[derive(Debug, Clone)]
pub struct Timeline {
    segs: Vec<Seg>,
    gaps: Vec<Gap>,
}

impl Timeline {
    pub fn new(meso: &[MesoSegment]) -> Timeline {
        let segs: Vec<Seg> = meso
            .iter()
            .map(|m| Seg {
                cell: m.cell,
                s: m.start.0,
                e: m.end.0,
                home: m.is_home(),
                min_dur: m.min_dur,
            })
            .collect();
        let mut gaps = Vec::with_capacity(segs.len() + 1);
        match (segs.first(), segs.last()) {
            (Some(f), Some(l)) => {
                gaps.push(Gap { a: NEG_INF, b: f.s - 1 });
                for w in segs.windows(2) {
                    if w[1].s > w[0].e + 1 {
                        gaps.push(Gap {
                            a: w[0].e + 1,
                            b: w[1].s - 1,
                        });
                    }
                }
                gaps.push(Gap { a: l.e + 1, b: POS_INF });
            }
            _ => gaps.push(Gap { a: NEG_INF, b: POS_INF }),
        }
        Timeline { segs, gaps }
    }

    /// Earliest true start of segment `i`; `None` at sample entry.
    fn lo(&self, i: usize, off: i32) -> Option<i32> {
        let g = &self.segs[i];
        let p = self.segs.get(i.checked_sub(1)?)?;
        Some(if p.cell == g.cell { p.e + off } else { p.e + 1 })
    }

    /// Latest true end of segment `i`; `None` at sample exit.
    fn hi(&self, i: usize, off: i32) -> Option<i32> {
        let g = &self.segs[i];
        let n = self.segs.get(i + 1)?;
        Some(if n.cell == g.cell { n.s - off } else { n.s - 1 })
    }

    /// Segment right after gap `gi`; gaps are stored in time order.
    fn seg_after_gap(&self, gi: usize) -> Option<&Seg> {
        let b = self.gaps[gi].b;
        self.segs.iter().find(|s| s.s == b + 1)
    }

    fn seg_before_gap(&self, gi: usize) -> Option<&Seg> {
        let a = self.gaps[gi].a;
        self.segs.iter().find(|s| s.e == a - 1)
    }

    fn prev_same(&self, i: usize) -> bool {
        i > 0 && self.segs[i - 1].cell == self.segs[i].cell
    }

    fn next_same(&self, i: usize) -> bool {
        self.segs.get(i + 1).is_some_and(|n| n.cell == self.segs[i].cell)
    }

    fn is_first(&self, i: usize) -> bool {
        i == 0
    }

    fn is_last(&self, i: usize) -> bool {
        i + 1 == self.segs.len()
    }

    pub fn evaluate(&self, t: HalfMonth, measure: Measure, p: &AggregationParams) -> Verdict {
        let (ts, te) = (t.start().0, t.end().0);
        match measure {
            Measure::Depart => self.departures(ts, te, p),
            Measure::Return => self.returns(ts, te, p),
            Measure::Stock => self.stock(ts, te, p),
        }
    }

    fn departures(&self, ts: i32, te: i32, p: &AggregationParams) -> Verdict {
        let tau = p.tau_min_days;
        let k1 = p.eps_gap_meso_days + 1;
        let k2 = p.eps_gap_meso_days + 2;
        let mut v = Verdict::default();
        let mut unobserved: SmallVec<[u8; 4]> = SmallVec::new();

        for (gi, g) in self.gaps.iter().enumerate() {
            if g.b < ts || g.a > te {
                continue;
            }
            if g.b as i64 - g.a.max(ts) as i64 + 1 >= tau as i64 {
                let home_after = self.seg_after_gap(gi).is_some_and(|s| s.home);
                unobserved.push(match (g.a < ts, g.b > te) {
                    (false, _) if g.exit() => 9,
                    (false, _) => 6,
                    (true, _) if g.entry() => 14,
                    (true, _) if g.exit() => 16,
                    // a gap ending inside t only hides a trip when tau fits in a half-month
                    (true, false) => 1,
                    (true, true) if home_after => 1,
                    (true, true) => 10,
                });
            }
        }

        for (i, g) in self.segs.iter().enumerate() {
            if g.home {
                continue;
            }
            if g.s >= ts && g.s <= te {
                let lo1 = self.lo(i, k1);
                let tolerated = match i.checked_sub(1).map(|j| &self.segs[j]) {
                    Some(prev) => prev.e >= ts || ts - prev.e - 1 <= p.eps_tol_days,
                    None => false,
                };
                if tolerated {
                    let lo1 = lo1.expect("previous segment exists");
                    if g.min_dur >= tau {
                        v.push(true, g.cell);
                        v.rules.push(Rule::DepartHigh(if self.is_last(i) { 2 } else { 1 }));
                    } else {
                        let hi1 = self.hi(i, k1).unwrap_or(g.e);
                        if len(lo1.max(ts), hi1) >= tau {
                            v.push(false, g.cell);
                            let exit = self.is_last(i);
                            let case = match (self.prev_same(i), lo1 > ts) {
                                (false, _) => 1,
                                (true, false) => 3,
                                (true, true) => 5,
                            } + exit as u8;
                            v.rules.push(Rule::DepartLow(case));
                        }
                    }
                } else {
                    let near = lo1.map_or(ts, |l| l.max(ts));
                    let far = self.hi(i, k1).unwrap_or(g.e);
                    if len(near, far) >= tau {
                        unobserved.push(match lo1 {
                            None => 5,
                            Some(_) if !self.prev_same(i) => 2,
                            Some(l) if l < ts => 3,
                            Some(_) => 4,
                        });
                    }
                }
            } else if g.s > te {
                let lo2 = self.lo(i, k2);
                if lo2.unwrap_or(NEG_INF) > te {
                    continue;
                }
                let near = lo2.map_or(ts, |l| l.max(ts));
                let far = self.hi(i, k1).unwrap_or(g.e);
                if len(near, far) >= tau {
                    let gap_left_of_t = i > 0 && self.segs[i - 1].e < ts;
                    unobserved.push(match lo2 {
                        None => 15,
                        Some(_) if !gap_left_of_t => {
                            if self.prev_same(i) {
                                8
                            } else {
                                7
                            }
                        }
                        Some(_) if !self.prev_same(i) => 11,
                        Some(l) if l >= ts => 12,
                        Some(_) => 13,
                    });
                }
            }
        }
        finish(v, unobserved, Rule::DepartUnobserved)
    }

    fn returns(&self, ts: i32, te: i32, p: &AggregationParams) -> Verdict {
        let tau = p.tau_min_days;
        let k1 = p.eps_gap_meso_days + 1;
        let k2 = p.eps_gap_meso_days + 2;
        let mut v = Verdict::default();
        let mut unobserved: SmallVec<[u8; 4]> = SmallVec::new();

        for (gi, g) in self.gaps.iter().enumerate() {
            if g.b < ts || g.a > te {
                continue;
            }
            if g.b.min(te) as i64 - g.a as i64 + 1 >= tau as i64 {
                let home_before = self.seg_before_gap(gi).is_some_and(|s| s.home);
                unobserved.push(match (g.a < ts, g.b > te) {
                    (_, false) if g.entry() => 4,
                    (_, false) => 1,
                    (_, true) if g.entry() => 14,
                    (_, true) if g.exit() && g.a < ts => 15,
                    (false, true) => 5,
                    (true, true) if home_before => 5,
                    (true, true) => 10,
                });
            }
        }

        for (i, g) in self.segs.iter().enumerate() {
            if g.home {
                continue;
            }
            if g.e >= ts && g.e <= te {
                let hi1 = self.hi(i, k1);
                let tolerated = match self.segs.get(i + 1) {
                    Some(next) => next.s <= te || next.s - te - 1 <= p.eps_tol_days,
                    None => false,
                };
                if tolerated {
                    let hi1 = hi1.expect("next segment exists");
                    if g.min_dur >= tau {
                        v.push(true, g.cell);
                        v.rules.push(Rule::ReturnHigh(if self.is_first(i) { 2 } else { 1 }));
                    } else {
                        let lo1 = self.lo(i, k1).unwrap_or(g.s);
                        if len(lo1, hi1.min(te)) >= tau {
                            v.push(false, g.cell);
                            let entry = self.is_first(i);
                            let case = match (self.next_same(i), hi1 < te) {
                                (false, _) => 1,
                                (true, false) => 3,
                                (true, true) => 5,
                            } + entry as u8;
                            v.rules.push(Rule::ReturnLow(case));
                        }
                    }
                } else {
                    let hi2 = self.hi(i, k2);
                    let far = hi2.map_or(te, |h| h.min(te));
                    let near = self.lo(i, k1).unwrap_or(g.s);
                    if len(near, far) >= tau {
                        unobserved.push(match hi2 {
                            None => 9,
                            Some(_) if !self.next_same(i) => 6,
                            Some(h) if h > te => 7,
                            Some(_) => 8,
                        });
                    }
                }
            } else if g.e < ts {
                let hi2 = self.hi(i, k2);
                if hi2.unwrap_or(POS_INF) < ts {
                    continue;
                }
                let far = hi2.map_or(te, |h| h.min(te));
                let near = self.lo(i, k1).unwrap_or(g.s);
                if len(near, far) >= tau {
                    let gap_right_of_t = self.segs.get(i + 1).is_some_and(|n| n.s > te);
                    unobserved.push(match hi2 {
                        None => 16,
                        Some(_) if !gap_right_of_t => {
                            if self.next_same(i) {
                                3
                            } else {
                                2
                            }
                        }
                        Some(_) if !self.next_same(i) => 11,
                        Some(h) if h <= te => 12,
                        Some(_) => 13,
                    });
                }
            }
        }
        finish(v, unobserved, Rule::ReturnUnobserved)
    }

    fn stock(&self, ts: i32, te: i32, p: &AggregationParams) -> Verdict {
        let tau = p.tau_min_days;
        let sigma = p.sigma_days;
        let k1 = p.eps_gap_meso_days + 1;
        let mut v = Verdict::default();

        // (overlap, start) of the best candidate per confidence level
        let mut best_high: Option<(i32, i32, CellId, u8)> = None;
        let mut best_low: Option<(i32, i32, CellId, u8)> = None;
        let mut certain = false;
        let mut candidates = 0u32;
        for (i, g) in self.segs.iter().enumerate() {
            let ov = overlap(g.s, g.e, ts, te);
            if ov < sigma {
                continue;
            }
            certain = true;
            if g.home {
                continue;
            }
            let entry = self.is_first(i);
            let exit = self.is_last(i);
            let right = g.s > ts;
            if g.min_dur >= tau {
                let case = match (right, g.e < te) {
                    (true, _) => 1 + if exit { 1 } else if entry { 2 } else { 0 },
                    (false, true) => 4 + if entry { 1 } else if exit { 2 } else { 0 },
                    (false, false) => 7 + if exit { 1 } else if entry { 2 } else { 0 },
                };
                candidates += 1;
                if best_high.is_none_or(|(bo, _, _, _)| ov > bo) {
                    best_high = Some((ov, g.s, g.cell, case));
                }
            } else {
                let ws = self.lo(i, k1).unwrap_or(g.s);
                let we = self.hi(i, k1).unwrap_or(g.e);
                if len(ws, we) >= tau {
                    let case = if self.prev_same(i) {
                        if exit { 5 } else { 4 }
                    } else if self.next_same(i) {
                        if entry { 7 } else { 6 }
                    } else if entry {
                        3
                    } else if exit {
                        2
                    } else {
                        1
                    };
                    // the left-overlap family repeats the right one as 8..14
                    let case = if right {
                        case
                    } else {
                        [8, 10, 9, 13, 14, 11, 12][case as usize - 1]
                    };
                    candidates += 1;
                    if best_low.is_none_or(|(bo, _, _, _)| ov > bo) {
                        best_low = Some((ov, g.s, g.cell, case));
                    }
                }
            }
        }
        if let Some((_, _, cell, case)) = best_high {
            v.high.push(cell);
            v.rules.push(Rule::StockHigh(case));
        }
        if let Some((_, _, cell, case)) = best_low {
            if best_high.is_none() {
                v.low.push(cell);
            }
            v.rules.push(Rule::StockLow(case));
        }
        v.duplicates = candidates.saturating_sub(v.high.len() as u32 + v.low.len() as u32);

        let mut unobserved: SmallVec<[u8; 4]> = SmallVec::new();
        if !certain {
            for g in &self.gaps {
                if len(g.a, g.b) >= tau && overlap(g.a, g.b, ts, te) >= sigma {
                    unobserved.push(match (g.a < ts, g.b > te) {
                        (true, false) if g.entry() => 4,
                        (true, false) => 1,
                        (false, true) if g.exit() => 8,
                        (false, _) => 5,
                        (true, true) if g.exit() => 12,
                        (true, true) if g.entry() => 13,
                        (true, true) => 9,
                    });
                }
            }
            for (i, g) in self.segs.iter().enumerate() {
                if g.home || overlap(g.s, g.e, ts, te) >= sigma {
                    continue;
                }
                let lo = self.lo(i, k1).unwrap_or(g.s);
                let hi = self.hi(i, k1).unwrap_or(g.e);
                let ws = if g.s >= ts { lo.max(ts) } else { lo };
                let we = if g.e <= te { hi.min(te) } else { hi };
                if len(ws, we) >= tau && overlap(ws, we, ts, te) >= sigma {
                    unobserved.push(if g.s > te {
                        if lo >= ts { 7 } else { 11 }
                    } else if g.e < ts {
                        if hi <= te { 3 } else { 10 }
                    } else if g.s >= ts {
                        if lo < ts {
                            2
                        } else if self.is_last(i) {
                            16
                        } else {
                            14
                        }
                    } else if hi > te {
                        6
                    } else if self.is_first(i) {
                        17
                    } else {
                        15
                    });
                }
            }
        }
        finish(v, unobserved, Rule::StockUnobserved)
    }
}

fn finish(mut v: Verdict, unobserved: SmallVec<[u8; 4]>, tag: fn(u8) -> Rule) -> Verdict {
    v.observed = unobserved.is_empty();
    v.rules.extend(unobserved.into_iter().map(tag));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::Day;
    use proptest::prelude::*;

    fn seg(cell: CellId, a: Day, b: Day) -> MesoSegment {
        MesoSegment {
            cell,
            start: a,
            end: b,
            min_dur: b - a + 1,
            max_dur: b - a + 1,
            macro_cell: 0,
            frac: 1.0,
        }
    }

    fn d(m: u32, day: u32) -> Day {
        Day::ymd(2013, m, day)
    }

    fn eval(segs: &[MesoSegment], t: HalfMonth, m: Measure) -> Verdict {
        Timeline::new(segs).evaluate(t, m, &AggregationParams::default())
    }

    #[test]
    fn departure_examples() {
        let mar2 = HalfMonth::new(2013, 3, 2);
        let v = eval(&[seg(0, d(1, 1), d(3, 18)), seg(1, d(3, 20), d(4, 30)), seg(0, d(5, 1), d(9, 1))], mar2, Measure::Depart);
        assert!(v.observed);
        assert_eq!(v.high.as_slice(), &[1]);
        assert_eq!(v.rules.as_slice(), &[Rule::DepartHigh(1)]);

        let v = eval(&[seg(0, d(1, 1), d(2, 25)), seg(1, d(3, 20), d(4, 30)), seg(0, d(5, 1), d(9, 1))], mar2, Measure::Depart);
        assert!(!v.observed);
        assert!(v.destinations(true).is_empty());
        assert_eq!(v.rules.as_slice(), &[Rule::DepartUnobserved(2)]);

        let v = eval(&[seg(0, d(1, 1), d(3, 15)), seg(1, d(3, 17), d(4, 2)), seg(0, d(4, 7), d(9, 1))], mar2, Measure::Depart);
        assert!(v.observed);
        assert!(v.high.is_empty());
        assert_eq!(v.low.as_slice(), &[1]);
        assert_eq!(v.rules.as_slice(), &[Rule::DepartLow(1)]);
    }

    #[test]
    fn return_examples() {
        let jun1 = HalfMonth::new(2013, 6, 1);
        let v = eval(&[seg(0, d(1, 1), d(4, 30)), seg(1, d(5, 2), d(6, 10)), seg(0, d(6, 12), d(9, 1))], jun1, Measure::Return);
        assert_eq!((v.observed, v.high.as_slice()), (true, &[1][..]));
        let v = eval(&[seg(0, d(1, 1), d(4, 30)), seg(1, d(5, 2), d(6, 14)), seg(0, d(7, 5), d(9, 1))], jun1, Measure::Return);
        assert!(!v.observed);
    }

    #[test]
    fn stock_examples() {
        let aug1 = HalfMonth::new(2013, 8, 1);
        let v = eval(&[seg(0, d(1, 1), d(7, 31)), seg(1, d(8, 1), d(8, 20)), seg(0, d(8, 21), d(12, 31))], aug1, Measure::Stock);
        assert_eq!((v.observed, v.high.as_slice()), (true, &[1][..]));
        assert_eq!(v.rules.as_slice(), &[Rule::StockHigh(7)]);
        let v = eval(&[seg(0, d(1, 1), d(8, 9)), seg(1, d(8, 10), d(9, 30)), seg(0, d(10, 1), d(12, 31))], aug1, Measure::Stock);
        assert!(v.observed && v.high.is_empty());
    }

    #[test]
    fn left_gap_hides_departure() {
        let t = HalfMonth::new(2013, 3, 1);
        let segs = [seg(0, d(1, 1), d(2, 20)), seg(0, t.start() + 25, d(9, 1))];
        let v = eval(&segs, t, Measure::Depart);
        assert!(!v.observed);
        assert_eq!(v.rules.as_slice(), &[Rule::DepartUnobserved(1)]);
        let away = [seg(0, d(1, 1), d(2, 20)), seg(2, t.start() + 25, d(9, 1))];
        assert!(eval(&away, t, Measure::Depart).rules.contains(&Rule::DepartUnobserved(10)));
        let full = [seg(0, d(1, 1), d(12, 31))];
        for m in Measure::ALL {
            let v = eval(&full, t, m);
            assert!(v.observed && v.destinations(true).is_empty() && v.rules.is_empty());
        }
    }

    /// Random trajectories: (cell, length, gap before). Same-cell neighbours
    /// are kept more than eps apart, as detection guarantees.
    fn timeline(gap_free: bool) -> impl Strategy<Value = Vec<MesoSegment>> {
        proptest::collection::vec((0u32..3, 1i32..60, 0i32..30), 1..8).prop_map(move |raw| {
            let mut out: Vec<MesoSegment> = Vec::new();
            let mut day = Day::ymd(2013, 1, 1).0;
            for (cell, len, gap) in raw {
                let mut gap = if gap_free { 0 } else { gap };
                if let Some(p) = out.last() {
                    if p.cell == cell {
                        if gap_free {
                            continue;
                        }
                        gap = gap.max(8);
                    }
                }
                day += gap;
                out.push(seg(cell, Day(day), Day(day + len - 1)));
                day += len;
            }
            out
        })
    }

    proptest! {
        #[test]
        fn verdict_invariants(segs in timeline(false), ti in 0i32..8) {
            let t = HalfMonth::from_index(HalfMonth::new(2013, 1, 1).index() + ti);
            let tl = Timeline::new(&segs);
            for m in Measure::ALL {
                let v = tl.evaluate(t, m, &AggregationParams::default());
                let high = v.destinations(false);
                let all = v.destinations(true);
                prop_assert!(high.iter().all(|c| all.contains(c)));
                prop_assert!(!(v.rules.iter().any(|r| r.is_unobserved()) && v.observed));
                if m == Measure::Stock {
                    prop_assert!(all.len() <= 1);
                }
                for c in &all {
                    prop_assert!(*c != 0, "home cell reported as destination");
                }
            }
        }

        #[test]
        fn gap_free_confidences_agree(segs in timeline(true), ti in 0i32..8) {
            let t = HalfMonth::from_index(HalfMonth::new(2013, 1, 1).index() + ti);
            let tl = Timeline::new(&segs);
            for m in Measure::ALL {
                let v = tl.evaluate(t, m, &AggregationParams::default());
                prop_assert_eq!(v.destinations(false), v.destinations(true));
            }
        }
    }
}
