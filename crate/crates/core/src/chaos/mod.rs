//! Chaotic phase-shifter model.
//!
//! A chaotic phase shifter rotates a mode by `θ(t) = ∫₀ᵗ δ(τ) dτ`. Averaged
//! over a broadband `δ`, the phase factor shrinks to `⟨e^{±iθ}⟩ = √M`, with
//! the correction factor `M` set by the spectrum of `δ`. This module computes
//! `M` from a spectrum and checks it against synthetic Gaussian phase
//! processes with the same spectrum.

mod process;
mod psd;

pub use process::{
    empirical_correction_factor, generate_phase_process, EmpiricalCorrection, PhaseProcess, SamplingGrid,
    MIN_REALIZATIONS, MIN_SAMPLES,
};
pub use psd::{correction_factor_from_psd, CorrectionFactor, PsdKind, PsdSpec};

/// Default band (rad/s) used when a correction factor is given without a
/// spectrum and one has to be synthesized.
pub const DEFAULT_BAND: (f64, f64) = (1.0, 10.0);
