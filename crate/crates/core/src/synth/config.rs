use std::path::Path;
use std::str::FromStr;

use crate::calendar::{Day, Month, Window};
use crate::error::{Error, Result};

/// Scenario for the synthetic generator, read from `key=value` lines
/// (`#` starts a comment). Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub agents: usize,
    pub cells: usize,
    pub urban_cells: usize,
    pub urban_pop: f64,
    pub rural_pop: f64,
    pub start: Day,
    pub months: u32,
    pub seed: u64,
    pub events_per_year: f64,
    pub event_min_days: i32,
    pub event_max_days: i32,
    pub micro_trips_per_year: f64,
    pub micro_min_days: i32,
    pub micro_max_days: i32,
    pub calls_per_day: f64,
    /// Probability that a day carries at least one call.
    pub obs_prob: f64,
    /// Override of `obs_prob` for agents living in urban cells.
    pub obs_prob_urban: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            agents: 1000,
            cells: 50,
            urban_cells: 5,
            urban_pop: 5000.0,
            rural_pop: 1000.0,
            start: Day::ymd(2013, 1, 1),
            months: 24,
            seed: 42,
            events_per_year: 1.5,
            event_min_days: 20,
            event_max_days: 120,
            micro_trips_per_year: 4.0,
            micro_min_days: 1,
            micro_max_days: 15,
            calls_per_day: 3.0,
            obs_prob: 1.0,
            obs_prob_urban: None,
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::config(format!("scenario key `{key}`: cannot parse `{raw}`")))
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<ScenarioConfig> {
        let mut c = ScenarioConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::config(format!("scenario line {}: expected key=value", n + 1)));
            };
            c.set(k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScenarioConfig::parse(&text)
    }

    pub fn set(&mut self, k: &str, v: &str) -> Result<()> {
        match k {
            "agents" => self.agents = value(k, v)?,
            "cells" => self.cells = value(k, v)?,
            "urban_cells" => self.urban_cells = value(k, v)?,
            "urban_pop" => self.urban_pop = value(k, v)?,
            "rural_pop" => self.rural_pop = value(k, v)?,
            "start" => self.start = value(k, v)?,
            "months" => self.months = value(k, v)?,
            "seed" => self.seed = value(k, v)?,
            "events_per_year" => self.events_per_year = value(k, v)?,
            "event_min_days" => self.event_min_days = value(k, v)?,
            "event_max_days" => self.event_max_days = value(k, v)?,
            "micro_trips_per_year" => self.micro_trips_per_year = value(k, v)?,
            "micro_min_days" => self.micro_min_days = value(k, v)?,
            "micro_max_days" => self.micro_max_days = value(k, v)?,
            "calls_per_day" => self.calls_per_day = value(k, v)?,
            "obs_prob" => self.obs_prob = value(k, v)?,
            "obs_prob_urban" => self.obs_prob_urban = Some(value(k, v)?),
            _ => return Err(Error::config(format!("unknown scenario key `{k}`"))),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "agents={}\ncells={}\nurban_cells={}\nurban_pop={}\nrural_pop={}\nstart={}\nmonths={}\nseed={}\n\
             events_per_year={}\nevent_min_days={}\nevent_max_days={}\nmicro_trips_per_year={}\n\
             micro_min_days={}\nmicro_max_days={}\ncalls_per_day={}\nobs_prob={}\n",
            self.agents,
            self.cells,
            self.urban_cells,
            self.urban_pop,
            self.rural_pop,
            self.start,
            self.months,
            self.seed,
            self.events_per_year,
            self.event_min_days,
            self.event_max_days,
            self.micro_trips_per_year,
            self.micro_min_days,
            self.micro_max_days,
            self.calls_per_day,
            self.obs_prob,
        );
        if let Some(p) = self.obs_prob_urban {
            s.push_str(&format!("obs_prob_urban={p}\n"));
        }
        s
    }

    /// Days covered: `months` whole calendar months from the month of `start`.
    pub fn window(&self) -> Window {
        let first = self.start.month_key();
        let last = Month::from_index(first.index() + self.months as i32 - 1);
        Window::new(first.first_day(), last.last_day())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(m.to_string()));
        if self.cells < 2 {
            return bad("scenario needs at least 2 cells");
        }
        if self.urban_cells > self.cells {
            return bad("urban_cells exceeds cells");
        }
        if self.months == 0 {
            return bad("scenario horizon is empty");
        }
        if self.event_min_days < 1 || self.event_min_days > self.event_max_days {
            return bad("need 1 <= event_min_days <= event_max_days");
        }
        if self.event_max_days + 2 * super::BUFFER_DAYS > self.window().len() {
            return bad("events longer than the horizon");
        }
        if self.micro_min_days < 1 || self.micro_min_days > self.micro_max_days {
            return bad("need 1 <= micro_min_days <= micro_max_days");
        }
        if self.micro_max_days >= self.event_min_days {
            return bad("micro-trips must be shorter than events");
        }
        for p in std::iter::once(self.obs_prob).chain(self.obs_prob_urban) {
            if !(p > 0.0 && p <= 1.0) {
                return bad("observation probabilities must lie in (0, 1]");
            }
        }
        if self.calls_per_day < 1.0 || self.events_per_year < 0.0 || self.micro_trips_per_year < 0.0 {
            return bad("rates must be >= 0 and calls_per_day >= 1");
        }
        Ok(())
    }
}
