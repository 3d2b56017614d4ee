//! One single-user configuration per reference diagram of the aggregation
//! rules. Days are offsets from the first day of the half-month under test
//! (1-15 March 2013), so the unit spans offsets 0..=14. Cell 0 is home.

use cdrmig::aggregation::{AggregationParams, Measure, Rule, Timeline, Verdict};
use cdrmig::calendar::{Day, HalfMonth};
use cdrmig::segmentation::MesoSegment;

pub struct Fixture {
    pub name: &'static str,
    pub measure: Measure,
    pub segs: &'static [(u32, i32, i32)],
    pub tau: i32,
    pub tol: i32,
    pub expect: Rule,
    /// Other rules may fire alongside the expected one.
    pub loose: bool,
}

const fn fx(name: &'static str, measure: Measure, segs: &'static [(u32, i32, i32)], expect: Rule) -> Fixture {
    Fixture {
        name,
        measure,
        segs,
        tau: 20,
        tol: 7,
        expect,
        loose: false,
    }
}

const fn tau(mut f: Fixture, tau: i32) -> Fixture {
    f.tau = tau;
    f
}

const fn tol(mut f: Fixture, tol: i32) -> Fixture {
    f.tol = tol;
    f
}

const fn loose(mut f: Fixture) -> Fixture {
    f.loose = true;
    f
}

pub fn unit() -> HalfMonth {
    HalfMonth::new(2013, 3, 1)
}

impl Fixture {
    pub fn meso(&self) -> Vec<MesoSegment> {
        let t0 = unit().start().0;
        self.segs
            .iter()
            .map(|&(cell, a, b)| MesoSegment {
                cell,
                start: Day(t0 + a),
                end: Day(t0 + b),
                min_dur: b - a + 1,
                max_dur: b - a + 1,
                macro_cell: 0,
                frac: 1.0,
            })
            .collect()
    }

    pub fn params(&self) -> AggregationParams {
        AggregationParams {
            tau_min_days: self.tau,
            eps_tol_days: self.tol,
            ..AggregationParams::default()
        }
    }

    pub fn evaluate(&self) -> Verdict {
        Timeline::new(&self.meso()).evaluate(unit(), self.measure, &self.params())
    }

    /// Why the verdict disagrees with the diagram, if it does.
    pub fn check(&self) -> Result<(), String> {
        let v = self.evaluate();
        let fired = if self.loose {
            v.rules.contains(&self.expect)
        } else {
            v.rules.as_slice() == [self.expect]
        };
        if !fired {
            return Err(format!("expected {:?}, got {:?}", self.expect, v.rules));
        }
        let consistent = match self.expect {
            Rule::DepartHigh(_) | Rule::ReturnHigh(_) | Rule::StockHigh(_) => v.observed && v.high.as_slice() == [1],
            Rule::DepartLow(_) | Rule::ReturnLow(_) | Rule::StockLow(_) => {
                v.observed && v.high.is_empty() && v.low.as_slice() == [1]
            }
            _ => !v.observed && v.destinations(true).is_empty(),
        };
        if consistent {
            Ok(())
        } else {
            Err(format!("rule fired but verdict is {v:?}"))
        }
    }
}

use Measure::{Depart as D, Return as R, Stock as S};
use Rule::*;

pub const FIXTURES: &[Fixture] = &[
    // departures
    fx("depart high 1", D, &[(0, -60, -3), (1, 3, 40), (0, 41, 100)], DepartHigh(1)),
    fx("depart high 2", D, &[(0, -60, -3), (1, 3, 40)], DepartHigh(2)),
    fx("depart low 1", D, &[(0, -60, -1), (1, 3, 12), (0, 30, 100)], DepartLow(1)),
    fx("depart low 2", D, &[(0, -60, -1), (1, 3, 19)], DepartLow(2)),
    tol(fx("depart low 3", D, &[(1, -40, -10), (1, 3, 12), (0, 30, 100)], DepartLow(3)), 10),
    tol(fx("depart low 4", D, &[(1, -40, -10), (1, 3, 19)], DepartLow(4)), 10),
    fx("depart low 5", D, &[(1, -30, -5), (1, 5, 14), (0, 40, 100)], DepartLow(5)),
    fx("depart low 6", D, &[(1, -30, -5), (1, 5, 22)], DepartLow(6)),
    // returns
    fx("return high 1", R, &[(0, -100, -41), (1, -40, 10), (0, 18, 80)], ReturnHigh(1)),
    fx("return high 2", R, &[(1, -40, 10), (0, 18, 80)], ReturnHigh(2)),
    fx("return low 1", R, &[(0, -60, -10), (1, -1, 10), (0, 16, 80)], ReturnLow(1)),
    fx("return low 2", R, &[(1, -5, 10), (0, 16, 80)], ReturnLow(2)),
    tol(fx("return low 3", R, &[(0, -15, -8), (1, -5, 10), (1, 24, 60)], ReturnLow(3)), 10),
    tol(fx("return low 4", R, &[(1, -5, 10), (1, 24, 60)], ReturnLow(4)), 10),
    fx("return low 5", R, &[(0, -40, -10), (1, -6, 4), (1, 20, 60)], ReturnLow(5)),
    fx("return low 6", R, &[(1, -8, 4), (1, 20, 60)], ReturnLow(6)),
    // stock, high confidence
    fx("stock high 1", S, &[(0, -60, -1), (1, 5, 40), (0, 41, 80)], StockHigh(1)),
    fx("stock high 2", S, &[(0, -60, -1), (1, 5, 40)], StockHigh(2)),
    fx("stock high 3", S, &[(1, 5, 40), (0, 41, 80)], StockHigh(3)),
    fx("stock high 4", S, &[(0, -60, -31), (1, -30, 9), (0, 10, 80)], StockHigh(4)),
    fx("stock high 5", S, &[(1, -30, 9), (0, 10, 80)], StockHigh(5)),
    fx("stock high 6", S, &[(0, -60, -31), (1, -30, 9)], StockHigh(6)),
    fx("stock high 7", S, &[(0, -60, -31), (1, -30, 40), (0, 41, 80)], StockHigh(7)),
    fx("stock high 8", S, &[(0, -60, -31), (1, -30, 40)], StockHigh(8)),
    fx("stock high 9", S, &[(1, -30, 40), (0, 41, 80)], StockHigh(9)),
    // stock, low confidence
    fx("stock low 1", S, &[(0, -60, -5), (1, 4, 16), (0, 25, 80)], StockLow(1)),
    fx("stock low 2", S, &[(0, -60, -5), (1, 4, 16)], StockLow(2)),
    fx("stock low 3", S, &[(1, 4, 16), (0, 25, 80)], StockLow(3)),
    fx("stock low 4", S, &[(1, -40, -10), (1, 4, 16), (0, 25, 80)], StockLow(4)),
    fx("stock low 5", S, &[(1, -40, -10), (1, 4, 20)], StockLow(5)),
    fx("stock low 6", S, &[(0, -60, -5), (1, 4, 16), (1, 35, 60)], StockLow(6)),
    fx("stock low 7", S, &[(1, 4, 16), (1, 35, 60)], StockLow(7)),
    fx("stock low 8", S, &[(0, -60, -15), (1, -5, 8), (0, 15, 80)], StockLow(8)),
    fx("stock low 9", S, &[(1, -5, 8), (0, 15, 80)], StockLow(9)),
    fx("stock low 10", S, &[(0, -60, -15), (1, -5, 8)], StockLow(10)),
    fx("stock low 11", S, &[(0, -60, -15), (1, -5, 8), (1, 30, 60)], StockLow(11)),
    fx("stock low 12", S, &[(1, -5, 8), (1, 30, 60)], StockLow(12)),
    fx("stock low 13", S, &[(1, -50, -20), (1, -5, 8), (0, 15, 80)], StockLow(13)),
    fx("stock low 14", S, &[(1, -50, -20), (1, -5, 8)], StockLow(14)),
    // departure observation status
    tau(fx("depart unobserved 1", D, &[(0, -60, -20), (0, 12, 80)], DepartUnobserved(1)), 10),
    fx("depart unobserved 2", D, &[(0, -60, -9), (1, 3, 10), (0, 30, 80)], DepartUnobserved(2)),
    fx("depart unobserved 3", D, &[(1, -60, -20), (1, 3, 10), (0, 30, 80)], DepartUnobserved(3)),
    tol(fx("depart unobserved 4", D, &[(1, -60, -6), (1, 5, 12), (0, 30, 80)], DepartUnobserved(4)), 3),
    fx("depart unobserved 5", D, &[(1, 3, 10), (0, 30, 80)], DepartUnobserved(5)),
    fx("depart unobserved 6", D, &[(0, -60, 4), (0, 31, 80)], DepartUnobserved(6)),
    fx("depart unobserved 7", D, &[(0, -60, 5), (1, 21, 30), (0, 50, 80)], DepartUnobserved(7)),
    fx("depart unobserved 8", D, &[(1, -60, 5), (1, 21, 30), (0, 50, 80)], DepartUnobserved(8)),
    fx("depart unobserved 9", D, &[(0, -60, 4)], DepartUnobserved(9)),
    loose(fx("depart unobserved 10", D, &[(0, -60, -5), (2, 31, 80)], DepartUnobserved(10))),
    fx("depart unobserved 11", D, &[(0, -60, -3), (1, 19, 25), (0, 45, 80)], DepartUnobserved(11)),
    fx("depart unobserved 12", D, &[(1, -60, -3), (1, 19, 25), (0, 45, 80)], DepartUnobserved(12)),
    fx("depart unobserved 13", D, &[(1, -60, -12), (1, 19, 25), (0, 45, 80)], DepartUnobserved(13)),
    fx("depart unobserved 14", D, &[(0, 30, 80)], DepartUnobserved(14)),
    fx("depart unobserved 15", D, &[(1, 19, 25), (0, 45, 80)], DepartUnobserved(15)),
    fx("depart unobserved 16", D, &[(0, -60, -5)], DepartUnobserved(16)),
    // return observation status
    fx("return unobserved 1", R, &[(0, -60, -10), (0, 11, 80)], ReturnUnobserved(1)),
    fx("return unobserved 2", R, &[(0, -60, -30), (1, -20, -10), (0, 6, 80)], ReturnUnobserved(2)),
    fx("return unobserved 3", R, &[(0, -60, -30), (1, -20, -10), (1, 10, 40), (0, 41, 80)], ReturnUnobserved(3)),
    fx("return unobserved 4", R, &[(0, 10, 80)], ReturnUnobserved(4)),
    tau(fx("return unobserved 5", R, &[(0, -60, 2), (0, 31, 80)], ReturnUnobserved(5)), 10),
    fx("return unobserved 6", R, &[(0, -60, -10), (1, -9, 5), (0, 26, 80)], ReturnUnobserved(6)),
    fx("return unobserved 7", R, &[(0, -60, -10), (1, -9, 5), (1, 30, 60), (0, 61, 80)], ReturnUnobserved(7)),
    tol(fx("return unobserved 8", R, &[(0, -60, -10), (1, -9, 5), (1, 20, 60), (0, 61, 80)], ReturnUnobserved(8)), 3),
    fx("return unobserved 9", R, &[(0, -60, -10), (1, -9, 5)], ReturnUnobserved(9)),
    loose(fx("return unobserved 10", R, &[(0, -100, -61), (2, -60, -10), (0, 31, 80)], ReturnUnobserved(10))),
    fx("return unobserved 11", R, &[(0, -60, -25), (1, -15, -4), (0, 21, 80)], ReturnUnobserved(11)),
    fx("return unobserved 12", R, &[(0, -60, -25), (1, -15, -4), (1, 21, 50), (0, 51, 80)], ReturnUnobserved(12)),
    fx("return unobserved 13", R, &[(0, -60, -25), (1, -15, -4), (1, 30, 50), (0, 51, 80)], ReturnUnobserved(13)),
    fx("return unobserved 14", R, &[(0, 30, 80)], ReturnUnobserved(14)),
    fx("return unobserved 15", R, &[(0, -60, -10)], ReturnUnobserved(15)),
    fx("return unobserved 16", R, &[(0, -60, -25), (1, -15, -4)], ReturnUnobserved(16)),
    // stock observation status
    fx("stock unobserved 1", S, &[(0, -60, -21), (0, 10, 80)], StockUnobserved(1)),
    fx("stock unobserved 2", S, &[(0, -60, -10), (1, 10, 20), (0, 40, 80)], StockUnobserved(2)),
    fx("stock unobserved 3", S, &[(0, -60, -30), (1, -20, -5), (0, 10, 80)], StockUnobserved(3)),
    fx("stock unobserved 4", S, &[(0, 9, 80)], StockUnobserved(4)),
    fx("stock unobserved 5", S, &[(0, -60, 5), (0, 31, 80)], StockUnobserved(5)),
    fx("stock unobserved 6", S, &[(0, -60, -20), (1, -10, 5), (0, 25, 80)], StockUnobserved(6)),
    fx("stock unobserved 7", S, &[(0, -60, 5), (1, 21, 30), (0, 50, 80)], StockUnobserved(7)),
    fx("stock unobserved 8", S, &[(0, -60, 5)], StockUnobserved(8)),
    fx("stock unobserved 9", S, &[(0, -60, -5), (0, 31, 80)], StockUnobserved(9)),
    fx("stock unobserved 10", S, &[(0, -60, -20), (1, -12, -2), (0, 16, 80)], StockUnobserved(10)),
    fx("stock unobserved 11", S, &[(0, -60, -2), (1, 17, 25), (0, 45, 80)], StockUnobserved(11)),
    fx("stock unobserved 12", S, &[(0, -60, -5)], StockUnobserved(12)),
    fx("stock unobserved 13", S, &[(0, 30, 80)], StockUnobserved(13)),
    fx("stock unobserved 14", S, &[(0, -60, 3), (1, 9, 15), (0, 40, 80)], StockUnobserved(14)),
    fx("stock unobserved 15", S, &[(0, -60, -20), (1, -10, 3), (0, 9, 80)], StockUnobserved(15)),
    fx("stock unobserved 16", S, &[(0, -60, 3), (1, 9, 30)], StockUnobserved(16)),
    fx("stock unobserved 17", S, &[(1, -20, 3), (0, 9, 80)], StockUnobserved(17)),
];
