//! Half-month departures, returns, stocks and observation status.

mod counts;
mod edges;
mod rules;
mod table;

pub use counts::{count_users, CellCounts, UserHistory};
pub use edges::{CorpusWindow, EdgeSchedule};
pub use rules::{Rule, Timeline, Verdict};
pub use table::{MigrationTable, TableRow};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Depart,
    Return,
    Stock,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Depart, Measure::Return, Measure::Stock];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::Depart => "depart",
            Measure::Return => "return",
            Measure::Stock => "stock",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Measure> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::data(format!("unknown measure `{s}`")))
    }
}

/// Which segments feed the counts. Observation status is shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Confidence {
    /// Segments whose observed duration clears the threshold.
    High,
    /// Also segments that clear it only at their maximum duration.
    HighLow,
}

impl Confidence {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Confidence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Confidence> {
        match s {
            "high" => Ok(Confidence::High),
            "high+low" | "low" => Ok(Confidence::HighLow),
            _ => Err(Error::config(format!("confidence `{s}`: expected high or high+low"))),
        }
    }
}

impl fmt::Display for Confidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Confidence::High => "high",
            Confidence::HighLow => "high+low",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregationParams {
    pub eps_tol_days: i32,
    pub sigma_days: i32,
    /// Must match the value used for meso detection.
    pub eps_gap_meso_days: i32,
    pub tau_min_days: i32,
    pub confidence: Confidence,
}

impl Default for AggregationParams {
    fn default() -> Self {
        AggregationParams {
            eps_tol_days: 7,
            sigma_days: 8,
            eps_gap_meso_days: 7,
            tau_min_days: 20,
            confidence: Confidence::High,
        }
    }
}

impl AggregationParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=13).contains(&self.sigma_days) {
            return Err(Error::config("sigma must lie in 1..=13 days"));
        }
        if self.eps_tol_days < 0 || self.eps_gap_meso_days < 0 {
            return Err(Error::config("tolerances must be >= 0"));
        }
        if self.tau_min_days <= 0 {
            return Err(Error::config("tau_min must be positive"));
        }
        Ok(())
    }
}
