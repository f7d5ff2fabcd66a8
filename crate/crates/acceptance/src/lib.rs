//! Reporting helpers and pinned tolerances for the acceptance suite in
//! `tests/acceptance.rs`.

use std::io::Write;
use std::time::{Duration, Instant};

/// Closed-form vs generic Holevo bound, relative.
pub const DUAL_PATH_REL_TOL: f64 = 1e-9;
/// Holevo bound at unit transmittance.
pub const LOSSLESS_CHI_TOL: f64 = 1e-9;
/// Flat-band correction factor, closed form vs quadrature, relative.
pub const QUADRATURE_REL_TOL: f64 = 1e-10;
/// Monte Carlo agreement for Bob's variances, in standard errors.
pub const VARIANCE_SIGMAS: f64 = 5.0;
/// Monte Carlo agreement for mutual information and cross-covariances.
pub const STAT_SIGMAS: f64 = 3.0;
/// Required separation from the literal twin covariance.
pub const SEPARATION_SIGMAS: f64 = 5.0;
/// Accepted range for the empirical correction factor at `M = 0.01`.
pub const EMPIRICAL_M_RANGE: (f64, f64) = (0.005, 0.02);

/// Distance grid spacing (km) for the curve criteria.
pub const D_STEP_KM: f64 = 0.25;
pub const D_MAX_KM: f64 = 60.0;

/// Distance grid `0, D_STEP_KM, …, D_MAX_KM`.
pub fn distance_grid() -> Vec<f64> {
    let n = (D_MAX_KM / D_STEP_KM).round() as usize;
    (0..=n).map(|i| i as f64 * D_STEP_KM).collect()
}

/// Outcome of one criterion.
pub struct Verdict {
    pub id: &'static str,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Option<Duration>,
}

impl Verdict {
    /// Prints the one-line summary straight to stderr (bypassing the test
    /// harness capture) and panics on failure.
    pub fn report(self) {
        let over_budget = self.budget.is_some_and(|b| self.elapsed > b);
        let pass = self.pass && !over_budget;
        let budget = match self.budget {
            Some(b) => format!(" (budget {:.0} s{})", b.as_secs_f64(), if over_budget { ", EXCEEDED" } else { "" }),
            None => String::new(),
        };
        let line = format!(
            "criterion {:<3} [{}] {} | {} | {:.2} s{}\n",
            self.id,
            if pass { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            budget
        );
        let _ = std::io::stderr().write_all(line.as_bytes());
        assert!(pass, "criterion {} failed: {}", self.id, self.detail);
    }
}

/// Runs `check` under a timer; `check` returns pass/fail and a detail line.
pub fn criterion(
    id: &'static str,
    title: &'static str,
    budget: Option<Duration>,
    check: impl FnOnce() -> (bool, String),
) -> Verdict {
    let start = Instant::now();
    let (pass, detail) = check();
    Verdict {
        id,
        title,
        pass,
        detail,
        elapsed: start.elapsed(),
        budget,
    }
}
