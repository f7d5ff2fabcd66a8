use std::f64::consts::PI;

use serde::Serialize;

use crate::quad::adaptive_simpson;
use crate::{Error, Result};

/// Absolute tolerance on the exponent integral `∫ S/ω² dω`.
const EXPONENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PsdKind {
    /// Constant density over the band.
    FlatBand { density: f64 },
    /// Density sampled at increasing angular frequencies, linearly
    /// interpolated. The table must cover the band.
    Tabulated { omega: Vec<f64>, density: Vec<f64> },
}

/// One-sided power spectral density `S_δ(ω)` of a chaotic frequency signal,
/// restricted to `[omega_low, omega_high]` (rad/s).
///
/// Normalization: `⟨δ(t)δ(t+τ)⟩ = (π/2) ∫ S(ω) cos(ωτ) dω`, under which the
/// stationary phase variance is `π ∫ S/ω² dω = −ln M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdSpec {
    pub kind: PsdKind,
    pub omega_low: f64,
    pub omega_high: f64,
}

impl PsdSpec {
    pub fn flat_band(density: f64, omega_low: f64, omega_high: f64) -> Result<Self> {
        let spec = PsdSpec {
            kind: PsdKind::FlatBand { density },
            omega_low,
            omega_high,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tabulated(omega: Vec<f64>, density: Vec<f64>, omega_low: f64, omega_high: f64) -> Result<Self> {
        let spec = PsdSpec {
            kind: PsdKind::Tabulated { omega, density },
            omega_low,
            omega_high,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Flat band over `[omega_low, omega_high]` whose correction factor is
    /// exactly `m`.
    pub fn flat_band_for(m: f64, omega_low: f64, omega_high: f64) -> Result<Self> {
        if !(m > 0.0 && m <= 1.0) {
            return Err(Error::param("m", format!("must lie in (0, 1], got {m}")));
        }
        let density = -m.ln() / (PI * (1.0 / omega_low - 1.0 / omega_high));
        Self::flat_band(density.max(0.0), omega_low, omega_high)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_low > 0.0) {
            return Err(Error::param("omega_low", format!("must be positive, got {}", self.omega_low)));
        }
        if !(self.omega_high > self.omega_low) || !self.omega_high.is_finite() {
            return Err(Error::param("omega_high", "must be finite and exceed omega_low"));
        }
        match &self.kind {
            PsdKind::FlatBand { density } => {
                if !(*density >= 0.0) || !density.is_finite() {
                    return Err(Error::param("density", "must be finite and non-negative"));
                }
            }
            PsdKind::Tabulated { omega, density } => {
                if omega.len() != density.len() || omega.len() < 2 {
                    return Err(Error::param("table", "needs at least two (omega, density) pairs"));
                }
                if omega.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::param("table", "omega must be strictly increasing"));
                }
                if density.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
                    return Err(Error::param("table", "density must be finite and non-negative"));
                }
                if omega[0] > self.omega_low || omega[omega.len() - 1] < self.omega_high {
                    return Err(Error::param("table", "must cover [omega_low, omega_high]"));
                }
            }
        }
        Ok(())
    }

    /// `S(ω)`, zero outside the band.
    pub fn density_at(&self, w: f64) -> f64 {
        if w < self.omega_low || w > self.omega_high {
            return 0.0;
        }
        match &self.kind {
            PsdKind::FlatBand { density } => *density,
            PsdKind::Tabulated { omega, density } => {
                let i = omega.partition_point(|&x| x <= w).clamp(1, omega.len() - 1);
                let t = (w - omega[i - 1]) / (omega[i] - omega[i - 1]);
                density[i - 1] + t * (density[i] - density[i - 1])
            }
        }
    }

    /// `∫ S(ω)/ω² dω` over `[lo, hi] ∩ band`, by adaptive quadrature on each
    /// smooth piece.
    pub fn weighted_integral(&self, lo: f64, hi: f64) -> Result<f64> {
        let lo = lo.max(self.omega_low);
        let hi = hi.min(self.omega_high);
        if hi <= lo {
            return Ok(0.0);
        }
        let mut knots = vec![lo];
        if let PsdKind::Tabulated { omega, .. } = &self.kind {
            knots.extend(omega.iter().copied().filter(|&w| w > lo && w < hi));
        }
        knots.push(hi);
        let f = |w: f64| self.density_at(w) / (w * w);
        let tol = EXPONENT_TOL / (knots.len() - 1) as f64;
        knots
            .windows(2)
            .map(|k| adaptive_simpson(&f, k[0], k[1], tol))
            .sum()
    }

    /// Stationary variance of the accumulated phase, `π ∫ S/ω² dω`.
    pub fn phase_variance(&self) -> Result<f64> {
        match &self.kind {
            PsdKind::FlatBand { density } => Ok(PI * density * (1.0 / self.omega_low - 1.0 / self.omega_high)),
            PsdKind::Tabulated { .. } => Ok(PI * self.weighted_integral(self.omega_low, self.omega_high)?),
        }
    }

    /// Phase variance by quadrature regardless of kind.
    pub fn phase_variance_quadrature(&self) -> Result<f64> {
        Ok(PI * self.weighted_integral(self.omega_low, self.omega_high)?)
    }
}

/// Correction factor `M ∈ (0, 1]`: the squared magnitude of the averaged
/// phase factor `|⟨e^{iθ}⟩|²`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct CorrectionFactor(f64);

impl CorrectionFactor {
    pub fn new(m: f64) -> Result<Self> {
        if m > 0.0 && m <= 1.0 {
            Ok(CorrectionFactor(m))
        } else {
            Err(Error::param("m", format!("correction factor must lie in (0, 1], got {m}")))
        }
    }

    pub const ONE: CorrectionFactor = CorrectionFactor(1.0);

    pub fn value(self) -> f64 {
        self.0
    }

    /// `⟨e^{±iθ}⟩ = √M`.
    pub fn amplitude(self) -> f64 {
        self.0.sqrt()
    }
}

/// `M = exp[−π ∫ S_δ(ω)/ω² dω]`.
///
/// Flat bands use the closed form; tabulated spectra go through quadrature.
pub fn correction_factor_from_psd(spec: &PsdSpec) -> Result<CorrectionFactor> {
    spec.validate()?;
    let m = (-spec.phase_variance()?).exp();
    if m > 0.0 {
        CorrectionFactor::new(m)
    } else {
        Err(Error::Numeric(format!("correction factor underflows (phase variance {})", spec.phase_variance()?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_spectrum_gives_unity() {
        let spec = PsdSpec::flat_band(0.0, 1.0, 10.0).unwrap();
        assert_eq!(correction_factor_from_psd(&spec).unwrap().value(), 1.0);
    }

    #[test]
    fn tuned_flat_band() {
        // exp(−π·S₀·0.9) = 0.01 with S₀ = ln(100)/(0.9π) = 1.628745775287617...
        let spec = PsdSpec::flat_band(1.628_745_775_287_617_2, 1.0, 10.0).unwrap();
        assert_relative_eq!(correction_factor_from_psd(&spec).unwrap().value(), 0.01, max_relative = 1e-14);
        let tuned = PsdSpec::flat_band_for(0.01, 1.0, 10.0).unwrap();
        assert_relative_eq!(correction_factor_from_psd(&tuned).unwrap().value(), 0.01, max_relative = 1e-14);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for (s0, lo, hi) in [(1.6287, 1.0, 10.0), (0.3, 0.05, 2.0), (12.0, 40.0, 4000.0)] {
            let spec = PsdSpec::flat_band(s0, lo, hi).unwrap();
            let exact = (-spec.phase_variance().unwrap()).exp();
            let quad = (-spec.phase_variance_quadrature().unwrap()).exp();
            assert_relative_eq!(exact, quad, max_relative = 1e-10);
        }
    }

    #[test]
    fn tabulated_flat_band_matches() {
        let s0 = 1.628_745_775_287_617_2;
        let omega: Vec<f64> = (0..=20).map(|k| 0.5 + 0.5 * k as f64).collect();
        let density = vec![s0; omega.len()];
        let tab = PsdSpec::tabulated(omega, density, 1.0, 10.0).unwrap();
        let m = correction_factor_from_psd(&tab).unwrap().value();
        assert!((m - 0.01).abs() / 0.01 < 1e-6);
    }

    #[test]
    fn tabulated_linear_ramp() {
        // S(ω) = ω on [1, 4]: ∫ 1/ω dω = ln 4
        let tab = PsdSpec::tabulated(vec![0.0, 8.0], vec![0.0, 8.0], 1.0, 4.0).unwrap();
        assert_relative_eq!(tab.phase_variance().unwrap(), PI * 4f64.ln(), max_relative = 1e-11);
    }

    #[test]
    fn rejects_bad_band() {
        assert!(PsdSpec::flat_band(1.0, 0.0, 10.0).is_err());
        assert!(PsdSpec::flat_band(1.0, -1.0, 10.0).is_err());
        assert!(PsdSpec::flat_band(1.0, 5.0, 5.0).is_err());
        assert!(PsdSpec::flat_band(-1.0, 1.0, 5.0).is_err());
        assert!(PsdSpec::tabulated(vec![2.0, 10.0], vec![1.0, 1.0], 1.0, 5.0).is_err());
    }

    #[test]
    fn monotone_in_density_and_bandwidth() {
        let m = |s0: f64, hi: f64| {
            correction_factor_from_psd(&PsdSpec::flat_band(s0, 1.0, hi).unwrap())
                .unwrap()
                .value()
        };
        let mut last = 1.0;
        for s0 in [0.1, 0.5, 1.0, 2.0, 4.0] {
            let v = m(s0, 10.0);
            assert!(v < last);
            last = v;
        }
        let mut last = 1.0;
        for hi in [2.0, 5.0, 10.0, 100.0] {
            let v = m(1.0, hi);
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn correction_factor_range() {
        assert!(CorrectionFactor::new(0.0).is_err());
        assert!(CorrectionFactor::new(1.0 + 1e-12).is_err());
        assert!(CorrectionFactor::new(f64::NAN).is_err());
        assert_eq!(CorrectionFactor::new(0.25).unwrap().amplitude(), 0.5);
    }
}
