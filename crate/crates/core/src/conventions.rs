//! Market conventions shared by every module: the VIX averaging window,
//! the day count used to turn calendar days into year fractions, the call
//! moneyness window and the number of time nodes in the VIX integral.
//!
//! A process-wide instance is installed once (normally by the CLI) and read
//! everywhere else through [`global`]. Library callers that never install
//! one get [`Conventions::default`].

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    /// Length of the VIX averaging window in calendar days.
    pub window_days: f64,
    /// Days per year (ACT/365 by default).
    pub day_count: f64,
    pub moneyness_lo: f64,
    pub moneyness_hi: f64,
    /// Gauss–Legendre nodes for the time integral over the VIX window.
    pub time_nodes: usize,
    /// Options expiring in fewer calendar days than this are dropped on load.
    pub min_expiry_days: i64,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            window_days: 30.0,
            day_count: 365.0,
            moneyness_lo: 0.9,
            moneyness_hi: 2.0,
            time_nodes: 20,
            min_expiry_days: 7,
        }
    }
}

impl Conventions {
    /// Width of the VIX window in years.
    pub fn delta(&self) -> f64 {
        self.window_days / self.day_count
    }

    pub fn year_fraction(&self, days: i64) -> f64 {
        days as f64 / self.day_count
    }
}

static GLOBAL: OnceLock<Conventions> = OnceLock::new();

/// Install the process-wide conventions. Returns `false` if they were
/// already fixed (by an earlier call or an earlier read).
pub fn install(conventions: Conventions) -> bool {
    GLOBAL.set(conventions).is_ok()
}

pub fn global() -> &'static Conventions {
    GLOBAL.get_or_init(Conventions::default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_window_is_thirty_calendar_days() {
        let c = Conventions::default();
        assert!((c.delta() - 30.0 / 365.0).abs() < 1e-16);
        assert_eq!(c.year_fraction(365), 1.0);
    }
}
