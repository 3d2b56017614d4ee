//! Civil days, months and half-months in the corpus timezone.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};

use crate::error::Error;

const SECONDS_PER_DAY: i64 = 86_400;

/// A civil date, stored as days since 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Day(pub i32);

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

impl Day {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Day> {
        NaiveDate::from_ymd_opt(year, month, day).map(Day::from_naive)
    }

    /// Panicking variant for literals in tests and presets.
    pub fn ymd(year: i32, month: u32, day: u32) -> Day {
        Day::from_ymd(year, month, day).unwrap_or_else(|| panic!("bad date {year}-{month}-{day}"))
    }

    fn from_naive(d: NaiveDate) -> Day {
        Day((d - epoch()).num_days() as i32)
    }

    pub fn to_naive(self) -> NaiveDate {
        epoch() + chrono::Duration::days(self.0 as i64)
    }

    pub fn year(self) -> i32 {
        self.to_naive().year()
    }

    pub fn month(self) -> u32 {
        self.to_naive().month()
    }

    pub fn day_of_month(self) -> u32 {
        self.to_naive().day()
    }

    pub fn month_key(self) -> Month {
        let d = self.to_naive();
        Month::new(d.year(), d.month())
    }

    pub fn half_month(self) -> HalfMonth {
        let d = self.to_naive();
        HalfMonth::new(d.year(), d.month(), if d.day() <= 15 { 1 } else { 2 })
    }

    pub fn succ(self) -> Day {
        Day(self.0 + 1)
    }

    pub fn pred(self) -> Day {
        Day(self.0 - 1)
    }
}

impl Add<i32> for Day {
    type Output = Day;
    fn add(self, rhs: i32) -> Day {
        Day(self.0 + rhs)
    }
}

impl Sub<i32> for Day {
    type Output = Day;
    fn sub(self, rhs: i32) -> Day {
        Day(self.0 - rhs)
    }
}

impl Sub<Day> for Day {
    type Output = i32;
    fn sub(self, rhs: Day) -> i32 {
        self.0 - rhs.0
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_naive().format("%Y-%m-%d"))
    }
}

impl FromStr for Day {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .map(Day::from_naive)
            .map_err(|e| Error::data(format!("bad date `{s}`: {e}")))
    }
}

/// Converts an epoch timestamp to a civil day and hour of day in a fixed
/// UTC offset.
pub fn civil_day_hour(timestamp: i64, utc_offset_secs: i32) -> (Day, u8) {
    let local = timestamp + utc_offset_secs as i64;
    let day = local.div_euclid(SECONDS_PER_DAY);
    let hour = local.rem_euclid(SECONDS_PER_DAY) / 3600;
    (Day(day as i32), hour as u8)
}

/// Number of days, inclusive, in `[start, end]`; zero when empty.
pub fn span_len(start: Day, end: Day) -> i32 {
    (end - start + 1).max(0)
}

/// Days shared by two inclusive intervals.
pub fn overlap_len(a: (Day, Day), b: (Day, Day)) -> i32 {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    span_len(lo, hi)
}

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Month {
        debug_assert!((1..=12).contains(&month));
        Month { year, month }
    }

    /// Months since year 0; consecutive months differ by one.
    pub fn index(self) -> i32 {
        self.year * 12 + self.month as i32 - 1
    }

    pub fn from_index(idx: i32) -> Month {
        Month::new(idx.div_euclid(12), idx.rem_euclid(12) as u32 + 1)
    }

    pub fn first_day(self) -> Day {
        Day::ymd(self.year, self.month, 1)
    }

    pub fn last_day(self) -> Day {
        Month::from_index(self.index() + 1).first_day().pred()
    }

    pub fn len(self) -> i32 {
        self.last_day() - self.first_day() + 1
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Days 1-15 or 16-end of a calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfMonth {
    pub year: i32,
    pub month: u32,
    pub half: u8,
}

impl HalfMonth {
    pub fn new(year: i32, month: u32, half: u8) -> HalfMonth {
        debug_assert!(half == 1 || half == 2);
        HalfMonth { year, month, half }
    }

    pub fn index(self) -> i32 {
        Month::new(self.year, self.month).index() * 2 + self.half as i32 - 1
    }

    pub fn from_index(idx: i32) -> HalfMonth {
        let m = Month::from_index(idx.div_euclid(2));
        HalfMonth::new(m.year, m.month, (idx.rem_euclid(2) + 1) as u8)
    }

    pub fn start(self) -> Day {
        Day::ymd(self.year, self.month, if self.half == 1 { 1 } else { 16 })
    }

    pub fn end(self) -> Day {
        if self.half == 1 {
            Day::ymd(self.year, self.month, 15)
        } else {
            Month::new(self.year, self.month).last_day()
        }
    }

    pub fn bounds(self) -> (Day, Day) {
        (self.start(), self.end())
    }

    pub fn len(self) -> i32 {
        self.end() - self.start() + 1
    }

    pub fn contains(self, d: Day) -> bool {
        d >= self.start() && d <= self.end()
    }

    pub fn next(self) -> HalfMonth {
        HalfMonth::from_index(self.index() + 1)
    }
}

impl fmt::Display for HalfMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-H{}", self.year, self.month, self.half)
    }
}

/// Inclusive range of civil days covered by one CDR corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: Day,
    pub end: Day,
}

impl Window {
    pub fn new(start: Day, end: Day) -> Window {
        Window { start, end }
    }

    pub fn len(self) -> i32 {
        span_len(self.start, self.end)
    }

    pub fn contains(self, d: Day) -> bool {
        d >= self.start && d <= self.end
    }

    /// Half-months intersecting the window, in order.
    pub fn half_months(self) -> Vec<HalfMonth> {
        if self.end < self.start {
            return Vec::new();
        }
        let first = self.start.half_month().index();
        let last = self.end.half_month().index();
        (first..=last).map(HalfMonth::from_index).collect()
    }
}
