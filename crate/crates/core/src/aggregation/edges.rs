use crate::calendar::{Day, HalfMonth, Window};

/// Half-months dropped at the start and end of a corpus window because
/// events there cannot be fully observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSchedule {
    pub lead: usize,
    pub trail: usize,
}

/// A contiguous CDR corpus, optionally with a cap on trailing exclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusWindow {
    pub window: Window,
    pub trail_cap: Option<usize>,
}

impl CorpusWindow {
    pub fn new(window: Window) -> CorpusWindow {
        CorpusWindow {
            window,
            trail_cap: None,
        }
    }

    /// The single-year 2013 release.
    pub fn year_2013() -> CorpusWindow {
        CorpusWindow::new(Window::new(Day::ymd(2013, 1, 1), Day::ymd(2013, 12, 31)))
    }

    /// The 2014-2015 release; its trailing exclusion stops at two half-months.
    pub fn years_2014_2015() -> CorpusWindow {
        CorpusWindow {
            window: Window::new(Day::ymd(2014, 1, 1), Day::ymd(2015, 12, 31)),
            trail_cap: Some(2),
        }
    }

    /// One excluded half-month per full 15 days of `tau_min`, at least one.
    pub fn schedule(&self, tau_min_days: i32) -> EdgeSchedule {
        let k = (tau_min_days.max(0) / 15).max(1) as usize;
        EdgeSchedule {
            lead: k,
            trail: self.trail_cap.map_or(k, |c| k.min(c)),
        }
    }

    /// Half-months of the window kept after exclusion.
    pub fn kept(&self, tau_min_days: i32) -> Vec<HalfMonth> {
        let all = self.window.half_months();
        let s = self.schedule(tau_min_days);
        if s.lead + s.trail >= all.len() {
            return Vec::new();
        }
        all[s.lead..all.len() - s.trail].to_vec()
    }

    /// Half-months removed by the schedule, leading ones first.
    pub fn excluded(&self, tau_min_days: i32) -> Vec<HalfMonth> {
        let kept = self.kept(tau_min_days);
        self.window
            .half_months()
            .into_iter()
            .filter(|t| !kept.contains(t))
            .collect()
    }
}
