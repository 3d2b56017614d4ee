//! Observation profiles and subset selection.

use std::collections::BTreeSet;
use std::path::Path;

use crate::calendar::Day;
use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationProfile {
    pub user_id: String,
    pub n_records: u64,
    pub first_day: Day,
    pub last_day: Day,
    pub span_days: i32,
    pub days_observed: i32,
    pub frac_observed: f64,
    /// Longest run of unobserved days strictly inside the span.
    pub max_gap_days: i32,
}

/// Profile from the set of observed days (any order, duplicates allowed).
pub fn profile(user_id: &str, n_records: u64, days: &[Day]) -> Option<ObservationProfile> {
    let set: BTreeSet<Day> = days.iter().copied().collect();
    let first = *set.first()?;
    let last = *set.last()?;
    let mut max_gap = 0;
    let mut prev = first;
    for &d in set.iter().skip(1) {
        max_gap = max_gap.max(d - prev - 1);
        prev = d;
    }
    let span = last - first + 1;
    let observed = set.len() as i32;
    Some(ObservationProfile {
        user_id: user_id.to_string(),
        n_records,
        first_day: first,
        last_day: last,
        span_days: span,
        days_observed: observed,
        frac_observed: observed as f64 / span as f64,
        max_gap_days: max_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConstraints {
    pub min_span_days: i32,
    pub min_frac_observed: f64,
    pub max_gap_days: i32,
}

impl FilterConstraints {
    pub const SUBSET_A: FilterConstraints = FilterConstraints {
        min_span_days: 330,
        min_frac_observed: 0.8,
        max_gap_days: 15,
    };
    pub const SUBSET_B: FilterConstraints = FilterConstraints {
        min_span_days: 250,
        min_frac_observed: 0.5,
        max_gap_days: 25,
    };

    pub fn validate(&self) -> Result<()> {
        if self.min_span_days < 1 {
            return Err(Error::config("min span must be >= 1 day"));
        }
        if !(self.min_frac_observed > 0.0 && self.min_frac_observed <= 1.0) {
            return Err(Error::config("min observed fraction must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Inclusive on every bound. The fraction is compared as
    /// `days_observed >= min_frac * span` with a small tolerance so that
    /// e.g. 264/330 passes 0.8.
    pub fn accepts(&self, p: &ObservationProfile) -> bool {
        let need = self.min_frac_observed * p.span_days as f64;
        p.span_days >= self.min_span_days
            && p.days_observed as f64 >= need - 1e-9
            && p.max_gap_days <= self.max_gap_days
    }

    /// Parses `span/frac/gap`, e.g. `330/0.8/15`.
    pub fn parse(s: &str) -> Result<FilterConstraints> {
        let parts: Vec<&str> = s.split('/').collect();
        let [a, b, c] = parts[..] else {
            return Err(Error::config(format!("constraints `{s}`: expected span/frac/gap")));
        };
        let bad = |what: &str| Error::config(format!("constraints `{s}`: bad {what}"));
        let out = FilterConstraints {
            min_span_days: a.trim().parse().map_err(|_| bad("span"))?,
            min_frac_observed: b.trim().parse().map_err(|_| bad("fraction"))?,
            max_gap_days: c.trim().parse().map_err(|_| bad("gap"))?,
        };
        out.validate()?;
        Ok(out)
    }
}

pub fn select_subset(profiles: &[ObservationProfile], c: &FilterConstraints) -> BTreeSet<String> {
    profiles
        .iter()
        .filter(|p| c.accepts(p))
        .map(|p| p.user_id.clone())
        .collect()
}

const PROFILE_COLUMNS: [&str; 8] = [
    "user_id",
    "n_records",
    "first_day",
    "last_day",
    "span_days",
    "days_observed",
    "frac_observed",
    "max_gap_days",
];

pub fn write_profiles(path: &Path, profiles: &[ObservationProfile]) -> Result<()> {
    let mut w = io::csv_writer(path)?;
    w.write_record(PROFILE_COLUMNS)?;
    for p in profiles {
        w.write_record([
            p.user_id.clone(),
            p.n_records.to_string(),
            p.first_day.to_string(),
            p.last_day.to_string(),
            p.span_days.to_string(),
            p.days_observed.to_string(),
            format!("{:.6}", p.frac_observed),
            p.max_gap_days.to_string(),
        ])?;
    }
    io::finish_csv(path, w)
}

pub fn read_profiles(path: &Path) -> Result<Vec<ObservationProfile>> {
    let mut r = io::csv_reader(path)?;
    let cols = io::columns(path, r.headers()?, &PROFILE_COLUMNS)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let day = |k: usize| -> Result<Day> {
            rec[cols[k]]
                .parse()
                .map_err(|e: Error| io::parse_error(path, line, e.to_string()))
        };
        let span_days: i32 = io::parse_field(path, line, &rec[cols[4]])?;
        let days_observed: i32 = io::parse_field(path, line, &rec[cols[5]])?;
        out.push(ObservationProfile {
            user_id: rec[cols[0]].to_string(),
            n_records: io::parse_field(path, line, &rec[cols[1]])?,
            first_day: day(2)?,
            last_day: day(3)?,
            span_days,
            days_observed,
            // recomputed from the integer columns so a round trip is lossless
            frac_observed: days_observed as f64 / span_days.max(1) as f64,
            max_gap_days: io::parse_field(path, line, &rec[cols[7]])?,
        });
    }
    Ok(out)
}

pub fn write_user_list(path: &Path, users: &BTreeSet<String>) -> Result<()> {
    let mut w = io::csv_writer(path)?;
    w.write_record(["user_id"])?;
    for u in users {
        w.write_record([u])?;
    }
    io::finish_csv(path, w)
}

pub fn read_user_list(path: &Path) -> Result<BTreeSet<String>> {
    let mut r = io::csv_reader(path)?;
    let cols = io::columns(path, r.headers()?, &["user_id"])?;
    let mut out = BTreeSet::new();
    for rec in r.records() {
        out.insert(rec?[cols[0]].to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn days(v: &[i32]) -> Vec<Day> {
        v.iter().map(|&d| Day(d)).collect()
    }

    fn synthetic(span: i32, observed: i32, gap: i32) -> ObservationProfile {
        ObservationProfile {
            user_id: "u".into(),
            n_records: 0,
            first_day: Day(0),
            last_day: Day(span - 1),
            span_days: span,
            days_observed: observed,
            frac_observed: observed as f64 / span as f64,
            max_gap_days: gap,
        }
    }

    #[test]
    fn profile_examples() {
        let p = profile("u", 3, &days(&[1, 2, 3])).unwrap();
        assert_eq!((p.span_days, p.frac_observed, p.max_gap_days), (3, 1.0, 0));
        let p = profile("u", 2, &days(&[1, 10])).unwrap();
        assert_eq!((p.span_days, p.days_observed, p.max_gap_days), (10, 2, 8));
        assert!((p.frac_observed - 0.2).abs() < 1e-12);
        assert_eq!(profile("u", 4, &days(&[1, 4, 5, 9])).unwrap().max_gap_days, 3);
    }

    #[test]
    fn subset_boundaries() {
        let a = FilterConstraints::SUBSET_A;
        assert!(a.accepts(&synthetic(330, 264, 15)));
        assert!(!a.accepts(&synthetic(329, 326, 0)));
        assert!(FilterConstraints::SUBSET_B.accepts(&synthetic(250, 125, 25)));
        assert_eq!(FilterConstraints::parse("330/0.8/15").unwrap(), a);
        assert!(FilterConstraints::parse("330/0/15").is_err());
    }

    fn brute_gap(ds: &[i32]) -> i32 {
        let lo = *ds.iter().min().unwrap();
        let hi = *ds.iter().max().unwrap();
        let mut best = 0;
        let mut run = 0;
        for d in lo..=hi {
            if ds.contains(&d) {
                run = 0;
            } else {
                run += 1;
                best = best.max(run);
            }
        }
        best
    }

    proptest! {
        #[test]
        fn profile_invariants(mut ds in proptest::collection::vec(0i32..500, 1..80), rot in 0usize..80) {
            let p = profile("u", 0, &days(&ds)).unwrap();
            prop_assert!(p.days_observed <= p.span_days);
            prop_assert_eq!(p.max_gap_days, brute_gap(&ds));
            if p.days_observed >= 2 {
                prop_assert!(p.max_gap_days <= p.span_days - 2);
            }
            let k = rot % ds.len();
            ds.rotate_left(k);
            prop_assert_eq!(profile("u", 0, &days(&ds)).unwrap(), p);
        }

        #[test]
        fn a_within_b_and_monotone(
            specs in proptest::collection::vec((200i32..400, 0.3f64..1.0, 0i32..40), 1..60),
            bump in 0i32..20,
        ) {
            let profiles: Vec<_> = specs.iter().enumerate().map(|(i, &(span, f, gap))| {
                let obs = ((span as f64) * f).round() as i32;
                ObservationProfile { user_id: format!("u{i}"), ..synthetic(span, obs.max(1), gap) }
            }).collect();
            let a = select_subset(&profiles, &FilterConstraints::SUBSET_A);
            let b = select_subset(&profiles, &FilterConstraints::SUBSET_B);
            prop_assert!(a.is_subset(&b));
            let tighter = FilterConstraints { min_span_days: 250 + bump, ..FilterConstraints::SUBSET_B };
            prop_assert!(select_subset(&profiles, &tighter).is_subset(&b));
            let tighter = FilterConstraints { max_gap_days: 25 - bump, ..FilterConstraints::SUBSET_B };
            prop_assert!(select_subset(&profiles, &tighter).is_subset(&b));
        }
    }
}
