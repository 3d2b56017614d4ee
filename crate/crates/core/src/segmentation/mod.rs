//! Home periods (macro segments), stays (meso segments) and their
//! classification into temporary migration events.

mod annotate;
mod macro_seg;
mod meso;

pub use annotate::{annotate, home_at, macro_for};
pub use macro_seg::detect_macro;
pub use meso::detect_meso;

use std::path::Path;

use crate::calendar::Day;
use crate::io;
use crate::location::{self, DailySeries};
use crate::network::CellId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    pub tau_min_days: i32,
    pub tau_max_days: i32,
    pub eps_gap_macro_months: i32,
    pub eps_gap_meso_days: i32,
    pub phi: f64,
    pub min_month_days: usize,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            tau_min_days: 20,
            tau_max_days: 180,
            eps_gap_macro_months: 6,
            eps_gap_meso_days: 7,
            phi: 0.5,
            min_month_days: location::MIN_MONTH_DAYS,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> crate::Result<()> {
        if self.tau_min_days <= 0 || self.tau_min_days > self.tau_max_days {
            return Err(crate::Error::config("need 0 < tau_min <= tau_max"));
        }
        if !(self.phi > 0.0 && self.phi <= 1.0) {
            return Err(crate::Error::config("phi must lie in (0, 1]"));
        }
        if self.eps_gap_meso_days < 0 || self.eps_gap_macro_months < 0 {
            return Err(crate::Error::config("gap tolerances must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacroSegment {
    pub cell: CellId,
    pub start: Day,
    pub end: Day,
}

impl MacroSegment {
    pub fn len(&self) -> i32 {
        self.end - self.start + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MesoSegment {
    pub cell: CellId,
    pub start: Day,
    pub end: Day,
    pub min_dur: i32,
    pub max_dur: i32,
    pub macro_cell: CellId,
    pub frac: f64,
}

impl MesoSegment {
    pub fn is_home(&self) -> bool {
        self.cell == self.macro_cell
    }

    pub fn class(&self, tau_min: i32) -> SegmentClass {
        if self.is_home() {
            SegmentClass::Home
        } else if self.min_dur >= tau_min {
            SegmentClass::Migration
        } else if self.max_dur >= tau_min {
            SegmentClass::Ambiguous
        } else {
            SegmentClass::Short
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentClass {
    /// Stay at the home cell.
    Home,
    /// Non-home stay whose observed duration clears the threshold.
    Migration,
    /// Non-home stay that may or may not clear the threshold.
    Ambiguous,
    /// Non-home stay too short even at its maximum duration.
    Short,
}

/// A migration event: origin is the home context of the segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MigrationEvent {
    pub origin: CellId,
    pub destination: CellId,
    pub start: Day,
    pub end: Day,
    pub min_dur: i32,
    pub max_dur: i32,
}

/// High-confidence migration events among annotated segments.
pub fn classify(meso: &[MesoSegment], tau_min: i32) -> Vec<MigrationEvent> {
    meso.iter()
        .filter(|s| s.class(tau_min) == SegmentClass::Migration)
        .map(|s| MigrationEvent {
            origin: s.macro_cell,
            destination: s.cell,
            start: s.start,
            end: s.end,
            min_dur: s.min_dur,
            max_dur: s.max_dur,
        })
        .collect()
}

/// Detection output for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSegments {
    pub first_day: Day,
    pub last_day: Day,
    pub macros: Vec<MacroSegment>,
    pub meso: Vec<MesoSegment>,
}

/// Steps from daily series to annotated segments.
pub fn detect_user(daily: &DailySeries, params: &DetectionParams) -> Option<UserSegments> {
    let first_day = daily.first()?.0;
    let last_day = daily.last()?.0;
    let monthly = location::monthly(daily, params.min_month_days);
    let macros = detect_macro(&monthly, daily, params);
    let meso = detect_meso(daily, params);
    let meso = annotate(&meso, daily, &macros);
    Some(UserSegments {
        first_day,
        last_day,
        macros,
        meso,
    })
}

const SEGMENT_COLUMNS: [&str; 9] = [
    "user_id", "kind", "cell_id", "start", "end", "min_dur", "max_dur", "macro_cell", "frac",
];

/// Writes `user_id,kind,...` rows: one `span` row per user, then its
/// `macro` and `meso` rows. Users are written in the given order.
pub fn write_segments(path: &Path, users: &[(String, UserSegments)]) -> crate::Result<()> {
    let mut w = io::csv_writer(path)?;
    w.write_record(SEGMENT_COLUMNS)?;
    for (id, u) in users {
        let (a, b) = (u.first_day.to_string(), u.last_day.to_string());
        w.write_record([id.as_str(), "span", "", &a, &b, "", "", "", ""])?;
        for m in &u.macros {
            let (a, b) = (m.start.to_string(), m.end.to_string());
            w.write_record([id.as_str(), "macro", &m.cell.to_string(), &a, &b, "", "", "", ""])?;
        }
        for s in &u.meso {
            w.write_record([
                id.clone(),
                "meso".into(),
                s.cell.to_string(),
                s.start.to_string(),
                s.end.to_string(),
                s.min_dur.to_string(),
                s.max_dur.to_string(),
                s.macro_cell.to_string(),
                format!("{}", s.frac),
            ])?;
        }
    }
    io::finish_csv(path, w)
}

pub fn read_segments(path: &Path) -> crate::Result<Vec<(String, UserSegments)>> {
    let mut r = io::csv_reader(path)?;
    let cols = io::columns(path, r.headers()?, &SEGMENT_COLUMNS)?;
    let mut out: Vec<(String, UserSegments)> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let field = |k: usize| &rec[cols[k]];
        let day = |k: usize| -> crate::Result<Day> {
            field(k)
                .parse()
                .map_err(|e: crate::Error| io::parse_error(path, line, e.to_string()))
        };
        let user = field(0);
        match field(1) {
            "span" => out.push((
                user.to_string(),
                UserSegments {
                    first_day: day(3)?,
                    last_day: day(4)?,
                    macros: Vec::new(),
                    meso: Vec::new(),
                },
            )),
            kind @ ("macro" | "meso") => {
                let Some((_, u)) = out.last_mut().filter(|(id, _)| id == user) else {
                    return Err(io::parse_error(path, line, "segment row before its span row"));
                };
                let cell: CellId = io::parse_field(path, line, field(2))?;
                let (start, end) = (day(3)?, day(4)?);
                if kind == "macro" {
                    u.macros.push(MacroSegment { cell, start, end });
                } else {
                    u.meso.push(MesoSegment {
                        cell,
                        start,
                        end,
                        min_dur: io::parse_field(path, line, field(5))?,
                        max_dur: io::parse_field(path, line, field(6))?,
                        macro_cell: io::parse_field(path, line, field(7))?,
                        frac: io::parse_field(path, line, field(8))?,
                    });
                }
            }
            other => {
                return Err(io::parse_error(path, line, format!("unknown segment kind `{other}`")))
            }
        }
    }
    Ok(out)
}
