//! Secret key rate analysis for a two-user continuous-variable QKD link
//! multiplexed with chaotic phase shifters (q-CDMA).
//!
//! The crate is split the same way the computation is:
//!
//! - [`gaussian`]: two-mode covariance algebra, symplectic spectra, entropies
//!   and homodyne conditioning.
//! - [`chaos`]: correction factors from chaotic-signal spectra and synthetic
//!   phase processes used to check them.
//! - [`network`]: the analytic key-rate pipeline (variances, mutual
//!   information, Eve's entangling-cloner state, Holevo bound) plus the
//!   single-user baseline.
//! - [`montecarlo`]: phase-space sampling of the link at two fidelities for
//!   empirical validation of the analytic formulas.
//! - [`cli`]: configuration files, sweeps, CSV and SVG output behind the
//!   `qcdma` binary.

pub mod chaos;
pub mod cli;
pub mod error;
pub mod gaussian;
pub mod montecarlo;
pub mod network;
mod quad;
mod seed;

pub use error::{Error, Result};
