//! Analytic key-rate pipeline for two users sharing one lossy channel.
//!
//! Each Alice encodes on a chaotic phase-modulated coherent state; the two
//! modes are combined, sent through a channel attacked by an entangling
//! cloner, split at the receiver and decoded. Rates are for homodyne
//! detection with reverse reconciliation, `R = β·I(A:B) − χ(B:E)`.

mod baseline;
mod params;
mod skr;

pub use baseline::baseline_skr;
pub use params::{
    transmittance, ChannelParams, CrossMode, Interference, QcdmaParams, SubVacuumPolicy, User, UserParams,
};
pub use skr::{
    bob_variance, build_eve_cm, channel_input_variance, conditional_variance, cross_covariances, eve_spectrum,
    holevo_bound, holevo_bound_via, mutual_information, secret_key_rate, Holevo, HolevoPath, SkrBreakdown, UserRate,
};

/// Cross-covariance `ξ` of Bob `u` in the given convention.
pub fn xi_for(p: &QcdmaParams, u: User, mode: CrossMode) -> f64 {
    skr::xi(p, u, mode)
}

/// Cross-covariance `ψ` of Bob `u` in the given convention.
pub fn psi_for(p: &QcdmaParams, u: User, mode: CrossMode) -> f64 {
    skr::psi(p, u, mode)
}
