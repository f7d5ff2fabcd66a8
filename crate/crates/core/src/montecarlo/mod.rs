//! Phase-space sampling of the two-user link.
//!
//! Gaussian states have positive Wigner functions, so drawing quadratures
//! as classical Gaussian variables and pushing them through the linear mode
//! transformations reproduces every second moment exactly. Two fidelities
//! are available: [`simulate_averaged`] replaces each phase factor by its
//! mean, [`simulate_explicit_phase`] draws the chaotic phases per sample and
//! applies the rotations. [`empirical_stats`] turns a batch into estimates
//! with bootstrap errors that can be set against the analytic values.

mod sample;
mod stats;

pub use sample::{
    simulate_averaged, simulate_explicit_phase, Col, Model, Row, SampleBatch, CORRECTION_MATCH_TOL, MIN_SAMPLES,
    NCOL,
};
pub use stats::{
    compare_with_analytic, empirical_stats, write_comparison_csv, Comparison, EmpiricalStats, Estimate, UserStats,
    BOOTSTRAP_BLOCKS, BOOTSTRAP_RESAMPLES, TRACKED,
};
