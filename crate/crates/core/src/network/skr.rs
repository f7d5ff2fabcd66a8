use nalgebra::Matrix4x2;
use serde::Serialize;

use super::params::{CrossMode, QcdmaParams, SubVacuumPolicy, User};
use crate::gaussian::{
    self, generic_spectrum, homodyne_condition, homodyne_condition_matrix, symplectic_spectrum, CrossCovariance,
    SpectrumMethod, SymplecticSpectrum, TwoModeCovariance,
};
use crate::{Error, Result};

/// Variance of the quadrature Bob `u` measures:
/// `(η/4)V_A + (M_u(1−η)/2)W + (M₁M₂η/4)Γ + (M_u/2)σ`.
pub fn bob_variance(p: &QcdmaParams, u: User) -> f64 {
    let (gamma, _) = p.gamma(u);
    bob_variance_with(p, u, p.user(u).v_a(), gamma)
}

/// Bob's variance given Alice's data: [`bob_variance`] with `V_A → V_0` and
/// `Γ → Γ₀`.
pub fn conditional_variance(p: &QcdmaParams, u: User) -> f64 {
    let (_, gamma0) = p.gamma(u);
    bob_variance_with(p, u, p.user(u).v_0, gamma0)
}

fn bob_variance_with(p: &QcdmaParams, u: User, v_a: f64, gamma: f64) -> f64 {
    let eta = p.channel.eta;
    let mu = p.m(u);
    let mm = p.m1.value() * p.m2.value();
    eta / 4.0 * v_a + mu * (1.0 - eta) / 2.0 * p.channel.w + mm * eta / 4.0 * gamma + mu / 2.0 * p.channel.sigma
}

/// `I(A:B) = ½ log₂(V_B / V_B|A)` in bits per channel use.
pub fn mutual_information(p: &QcdmaParams, u: User) -> Result<f64> {
    gaussian_mutual_information(bob_variance(p, u), conditional_variance(p, u))
}

pub(crate) fn gaussian_mutual_information(v_b: f64, v_b_given_a: f64) -> Result<f64> {
    if !(v_b_given_a > 0.0) {
        return Err(Error::Numeric(format!("conditional variance {v_b_given_a} is not positive")));
    }
    Ok(0.5 * (v_b / v_b_given_a).log2())
}

/// Variance of the mode entering the channel, `V₅ = (M₁V_A1 + M₂V_A2)/2`.
pub fn channel_input_variance(p: &QcdmaParams) -> f64 {
    0.5 * (p.m1.value() * p.user1.v_a() + p.m2.value() * p.user2.v_a())
}

/// Eve's state (her output mode and the kept EPR twin) under the entangling
/// cloner: blocks `E_V·I`, `W·I`, `Φ·Z`.
pub fn build_eve_cm(p: &QcdmaParams) -> TwoModeCovariance {
    cloner_cm(channel_input_variance(p), p.channel.eta, p.channel.w)
}

fn cloner_cm(input_var: f64, eta: f64, w: f64) -> TwoModeCovariance {
    let (ev, phi) = cloner_terms(input_var, eta, w);
    TwoModeCovariance::symmetric_form(ev, w, phi)
}

/// `(E_V, Φ) = ((1−η)V + ηW, √(η(W²−1)))`.
fn cloner_terms(input_var: f64, eta: f64, w: f64) -> (f64, f64) {
    ((1.0 - eta) * input_var + eta * w, (eta * (w * w - 1.0)).sqrt())
}

/// Symplectic eigenvalues of Eve's state,
/// `ν₁,₂ = ½[√((E_V+W)² − 4η(W²−1)) ± (E_V − W)]`.
pub fn eve_spectrum(p: &QcdmaParams) -> SymplecticSpectrum {
    cloner_spectrum(channel_input_variance(p), p.channel.eta, p.channel.w)
}

fn cloner_spectrum(input_var: f64, eta: f64, w: f64) -> SymplecticSpectrum {
    let (ev, _) = cloner_terms(input_var, eta, w);
    let root = ((ev + w) * (ev + w) - 4.0 * eta * (w * w - 1.0)).max(0.0).sqrt();
    SymplecticSpectrum::from_values([0.5 * (root + (ev - w)), 0.5 * (root - (ev - w))])
}

/// `ξ = ⟨X₈ X_B⟩` and `ψ = ⟨X'_N X_B⟩` for Bob `u`, in the modes selected by
/// `p.xi_mode` and `p.psi_mode`.
pub fn cross_covariances(p: &QcdmaParams, u: User) -> CrossCovariance {
    CrossCovariance {
        xi: xi(p, u, p.xi_mode),
        psi: psi(p, u, p.psi_mode),
    }
}

pub(crate) fn xi(p: &QcdmaParams, u: User, mode: CrossMode) -> f64 {
    let eta = p.channel.eta;
    let w = p.channel.w;
    let mu = p.m(u);
    let mj = p.m(u.other());
    let (gamma, _) = p.gamma(u);
    let loss = eta * (1.0 - eta);
    let s = (2.0 * mu * loss).sqrt();
    let interference = match mode {
        CrossMode::PaperLiteral => 0.25 * (2.0 * mu * mj * mj * loss).sqrt() * gamma,
        // The interferer's phases in X₈ and X_B differ by θ_u alone.
        CrossMode::Derived => 0.25 * s * gamma,
    };
    0.5 * s * w - 0.25 * s * p.user(u).v_a() - interference
}

pub(crate) fn psi(p: &QcdmaParams, u: User, mode: CrossMode) -> f64 {
    let eta = p.channel.eta;
    let w = p.channel.w;
    let epr = (w * w - 1.0).sqrt();
    match mode {
        CrossMode::PaperLiteral => (1.0 - eta).sqrt() * epr,
        CrossMode::Derived => (p.m(u) * (1.0 - eta) / 2.0).sqrt() * epr,
    }
}

/// Which route computes the symplectic spectra inside the Holevo bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HolevoPath {
    /// Closed-form eigenvalues on the structured blocks.
    ClosedForm,
    /// Dense 4×4 conditioning and a general eigensolver.
    Generic,
}

/// Holevo bound `χ = S(E) − S(E|X_B)` with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Holevo {
    pub s_e: f64,
    pub s_e_cond: f64,
    /// `max(0, S(E) − S(E|X_B))`.
    pub chi: f64,
    pub chi_raw: f64,
    /// `ν²` of Eve's state, descending.
    pub eve_spectrum_sq: [f64; 2],
    /// `ν²` of Eve's state conditioned on Bob's outcome, descending.
    pub cond_spectrum_sq: [f64; 2],
    /// Set when an eigenvalue below the vacuum bound was clamped.
    pub sub_vacuum: bool,
}

fn entropy(spectrum: &SymplecticSpectrum, policy: SubVacuumPolicy) -> Result<(f64, bool)> {
    match policy {
        SubVacuumPolicy::Reject => Ok((gaussian::von_neumann_entropy(spectrum)?, false)),
        SubVacuumPolicy::Clamp => Ok(gaussian::von_neumann_entropy_clamped(spectrum)),
    }
}

fn assemble(eve: SymplecticSpectrum, cond: SymplecticSpectrum, policy: SubVacuumPolicy) -> Result<Holevo> {
    let (s_e, clamp_e) = entropy(&eve, policy)?;
    let (s_e_cond, clamp_c) = entropy(&cond, policy)?;
    let chi_raw = s_e - s_e_cond;
    Ok(Holevo {
        s_e,
        s_e_cond,
        chi: chi_raw.max(0.0),
        chi_raw,
        eve_spectrum_sq: eve.squared(),
        cond_spectrum_sq: cond.squared(),
        sub_vacuum: clamp_e || clamp_c,
    })
}

/// Holevo information between Bob `u`'s homodyne outcome and Eve.
pub fn holevo_bound(p: &QcdmaParams, u: User) -> Result<Holevo> {
    holevo_bound_via(p, u, HolevoPath::ClosedForm)
}

pub fn holevo_bound_via(p: &QcdmaParams, u: User, path: HolevoPath) -> Result<Holevo> {
    let cross = cross_covariances(p, u);
    let v_b = bob_variance(p, u);
    holevo_of_cloner(channel_input_variance(p), p.channel.eta, p.channel.w, cross, v_b, p.sub_vacuum, path)
}

fn holevo_of_cloner(
    input_var: f64,
    eta: f64,
    w: f64,
    cross: CrossCovariance,
    v_b: f64,
    policy: SubVacuumPolicy,
    path: HolevoPath,
) -> Result<Holevo> {
    let cm = cloner_cm(input_var, eta, w);
    match path {
        HolevoPath::ClosedForm => {
            let eve = cloner_spectrum(input_var, eta, w);
            let cond = homodyne_condition(&cm, cross, v_b)?;
            assemble(eve, symplectic_spectrum(&cond, SpectrumMethod::ClosedForm)?, policy)
        }
        HolevoPath::Generic => {
            let sigma = cm.to_matrix();
            #[rustfmt::skip]
            let c = Matrix4x2::new(
                cross.xi, 0.0,
                0.0, cross.xi,
                cross.psi, 0.0,
                0.0, -cross.psi,
            );
            let cond = homodyne_condition_matrix(&sigma, &c, v_b)?;
            assemble(generic_spectrum(&sigma)?, generic_spectrum(&cond)?, policy)
        }
    }
}

/// Per-user results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserRate {
    pub v_b: f64,
    pub v_b_given_a: f64,
    pub i_ab: f64,
    pub xi: f64,
    pub psi: f64,
    /// Both cross-covariance conventions, for side-by-side diagnostics.
    pub xi_derived: f64,
    pub xi_paper_literal: f64,
    pub psi_derived: f64,
    pub psi_paper_literal: f64,
    pub s_e: f64,
    pub s_e_cond: f64,
    pub chi: f64,
    pub chi_raw: f64,
    /// `max(0, β·I − χ)`.
    pub r: f64,
    pub r_raw: f64,
    pub eve_spectrum_sq: [f64; 2],
    pub cond_spectrum_sq: [f64; 2],
    pub sub_vacuum: bool,
    /// Single-user rate with this user's source over the same channel.
    pub r_baseline: f64,
}

/// Full key-rate breakdown of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkrBreakdown {
    pub eta: f64,
    pub user1: UserRate,
    pub user2: UserRate,
    /// `r₁ + r₂`.
    pub r_total: f64,
    /// Single-user rate for user 1's source.
    pub r_baseline: f64,
}

impl SkrBreakdown {
    pub fn user(&self, u: User) -> &UserRate {
        match u {
            User::One => &self.user1,
            User::Two => &self.user2,
        }
    }
}

fn user_rate(p: &QcdmaParams, u: User) -> Result<UserRate> {
    let v_b = bob_variance(p, u);
    let v_b_given_a = conditional_variance(p, u);
    let i_ab = gaussian_mutual_information(v_b, v_b_given_a)?;
    let cross = cross_covariances(p, u);
    let h = holevo_bound(p, u)?;
    let r_raw = p.beta * i_ab - h.chi;
    Ok(UserRate {
        v_b,
        v_b_given_a,
        i_ab,
        xi: cross.xi,
        psi: cross.psi,
        xi_derived: xi(p, u, CrossMode::Derived),
        xi_paper_literal: xi(p, u, CrossMode::PaperLiteral),
        psi_derived: psi(p, u, CrossMode::Derived),
        psi_paper_literal: psi(p, u, CrossMode::PaperLiteral),
        s_e: h.s_e,
        s_e_cond: h.s_e_cond,
        chi: h.chi,
        chi_raw: h.chi_raw,
        r: r_raw.max(0.0),
        r_raw,
        eve_spectrum_sq: h.eve_spectrum_sq,
        cond_spectrum_sq: h.cond_spectrum_sq,
        sub_vacuum: h.sub_vacuum,
        r_baseline: super::baseline::baseline_skr(p.user(u), &p.channel, p.beta)?,
    })
}

/// Reverse-reconciliation key rates of both users and their sum.
pub fn secret_key_rate(p: &QcdmaParams) -> Result<SkrBreakdown> {
    p.validate()?;
    let user1 = user_rate(p, User::One)?;
    let user2 = user_rate(p, User::Two)?;
    Ok(SkrBreakdown {
        eta: p.channel.eta,
        user1,
        user2,
        r_total: user1.r + user2.r,
        r_baseline: user1.r_baseline,
    })
}

pub(crate) fn cloner_holevo(
    input_var: f64,
    eta: f64,
    w: f64,
    cross: CrossCovariance,
    v_b: f64,
    policy: SubVacuumPolicy,
) -> Result<Holevo> {
    holevo_of_cloner(input_var, eta, w, cross, v_b, policy, HolevoPath::ClosedForm)
}
