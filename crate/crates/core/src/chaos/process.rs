use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::psd::PsdSpec;
use crate::seed::{stream_rng, DOMAIN_BOOTSTRAP, DOMAIN_PHASE};
use crate::{Error, Result};

/// Minimum number of samples in a generated process.
pub const MIN_SAMPLES: usize = 1 << 10;
/// Minimum ensemble size for [`empirical_correction_factor`].
pub const MIN_REALIZATIONS: usize = 100;
const BOOTSTRAP_RESAMPLES: usize = 200;

/// A sampled chaotic frequency signal `δ(t)` and its accumulated phase
/// `θ(t) = ∫₀ᵗ δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProcess {
    pub dt: f64,
    pub delta: Vec<f64>,
    pub theta: Vec<f64>,
    pub seed: u64,
}

impl PhaseProcess {
    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |n| n as f64 * self.dt)
    }

    /// Writes `t,delta,theta` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Numeric(format!("csv write failed: {e}"));
        w.write_record(["t", "delta", "theta"]).map_err(io)?;
        for ((t, d), th) in self.times().zip(&self.delta).zip(&self.theta) {
            w.write_record([t.to_string(), d.to_string(), th.to_string()]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Numeric(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::Numeric(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Sampling grid of a phase process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingGrid {
    pub duration: f64,
    pub dt: f64,
}

impl SamplingGrid {
    pub fn samples(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    fn check(&self, spec: &PsdSpec) -> Result<usize> {
        if !(self.duration > 0.0) {
            return Err(Error::param("duration", "must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        if self.dt * spec.omega_high >= PI {
            return Err(Error::param(
                "dt",
                format!("dt·omega_high = {} violates the Nyquist limit π", self.dt * spec.omega_high),
            ));
        }
        let n = self.samples();
        if n < MIN_SAMPLES {
            return Err(Error::param("duration", format!("needs at least {MIN_SAMPLES} samples, got {n}")));
        }
        Ok(n)
    }
}

/// Per-bin variance of the in-phase and quadrature amplitudes.
///
/// Each bin carries the exact band integral of `S/ω²` over its width, so the
/// discrete process reproduces the phase variance without grid bias.
fn bin_variances(spec: &PsdSpec, n: usize, dt: f64) -> Result<Vec<(usize, f64)>> {
    let dw = 2.0 * PI / (n as f64 * dt);
    let first = ((spec.omega_low / dw - 0.5).floor().max(1.0)) as usize;
    let last = ((spec.omega_high / dw + 0.5).ceil() as usize).min(n.div_ceil(2) - 1);
    let mut out = Vec::with_capacity(last.saturating_sub(first) + 1);
    for k in first..=last {
        let w = k as f64 * dw;
        let weight = spec.weighted_integral(w - 0.5 * dw, w + 0.5 * dw)?;
        if weight > 0.0 {
            out.push((k, 0.5 * PI * w * w * weight));
        }
    }
    Ok(out)
}

/// Synthesizes a zero-mean stationary Gaussian `δ(t)` with the given spectrum
/// by spectral shaping, and integrates it to `θ(t)` with the trapezoid rule.
///
/// The process is periodic with period `duration`.
pub fn generate_phase_process(spec: &PsdSpec, duration: f64, dt: f64, seed: u64) -> Result<PhaseProcess> {
    spec.validate()?;
    let grid = SamplingGrid { duration, dt };
    let n = grid.check(spec)?;
    let bins = bin_variances(spec, n, dt)?;
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    Ok(synthesize(&bins, n, dt, seed, 0, &*ifft))
}

fn synthesize(
    bins: &[(usize, f64)],
    n: usize,
    dt: f64,
    seed: u64,
    index: u64,
    ifft: &dyn rustfft::Fft<f64>,
) -> PhaseProcess {
    let mut rng = stream_rng(seed, DOMAIN_PHASE, index);
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    for &(k, var) in bins {
        let sd = var.sqrt();
        let a: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
        let b: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
        // δ_n = Σ a cos(ω_k t) + b sin(ω_k t)
        spectrum[k] = Complex64::new(0.5 * a, -0.5 * b);
        spectrum[n - k] = Complex64::new(0.5 * a, 0.5 * b);
    }
    let delta: Vec<f64> = if bins.is_empty() {
        vec![0.0; n]
    } else {
        ifft.process(&mut spectrum);
        spectrum.iter().map(|c| c.re).collect()
    };
    let mut theta = Vec::with_capacity(n);
    let mut acc = 0.0;
    theta.push(acc);
    for w in delta.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        theta.push(acc);
    }
    PhaseProcess { dt, delta, theta, seed }
}

/// Empirical estimate of the correction factor with its bootstrap standard
/// error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalCorrection {
    pub m_hat: f64,
    pub std_err: f64,
    /// `|⟨e^{iθ}⟩|`, the estimate of `√M`.
    pub amplitude: f64,
    pub amplitude_std_err: f64,
    /// `|⟨e^{2iθ}⟩|`, which a Gaussian phase drives to `M²`.
    pub second_harmonic: f64,
    pub second_harmonic_std_err: f64,
    pub realizations: usize,
}

/// Estimates `M = |⟨e^{iθ}⟩|²` by averaging over `realizations` independent
/// phase processes and over time inside the stationary window.
///
/// The window drops `2π/ω_low` at both ends: the slowest component needs that
/// long to decorrelate from `θ(0) = 0`, and the periodic process returns to
/// zero at the end.
pub fn empirical_correction_factor(
    spec: &PsdSpec,
    realizations: usize,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<EmpiricalCorrection> {
    spec.validate()?;
    if realizations < MIN_REALIZATIONS {
        return Err(Error::param(
            "realizations",
            format!("needs at least {MIN_REALIZATIONS}, got {realizations}"),
        ));
    }
    let grid = SamplingGrid { duration, dt };
    let n = grid.check(spec)?;
    let guard = ((2.0 * PI / spec.omega_low) / dt).ceil() as usize;
    if 2 * guard >= n {
        return Err(Error::param(
            "duration",
            format!("must exceed twice the transient window 2π/ω_low = {}", 2.0 * PI / spec.omega_low),
        ));
    }
    let bins = bin_variances(spec, n, dt)?;
    let ifft = FftPlanner::new().plan_fft_inverse(n);

    let per_realization: Vec<[Complex64; 2]> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let p = synthesize(&bins, n, dt, seed, r as u64, &*ifft);
            let window = &p.theta[guard..n - guard];
            let mut first = Complex64::new(0.0, 0.0);
            let mut second = Complex64::new(0.0, 0.0);
            for &th in window {
                first += Complex64::from_polar(1.0, th);
                second += Complex64::from_polar(1.0, 2.0 * th);
            }
            let len = window.len() as f64;
            [first / len, second / len]
        })
        .collect();

    let stat = |idx: &mut dyn Iterator<Item = usize>| -> [f64; 2] {
        let mut sums = [Complex64::new(0.0, 0.0); 2];
        let mut count = 0usize;
        for i in idx {
            sums[0] += per_realization[i][0];
            sums[1] += per_realization[i][1];
            count += 1;
        }
        [(sums[0] / count as f64).norm(), (sums[1] / count as f64).norm()]
    };
    let [amp, second] = stat(&mut (0..realizations));

    let mut rng = stream_rng(seed, DOMAIN_BOOTSTRAP, 0);
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let draws: Vec<usize> = (0..realizations).map(|_| rng.random_range(0..realizations)).collect();
        boot.push(stat(&mut draws.into_iter()));
    }
    let sd = |f: &dyn Fn(&[f64; 2]) -> f64| {
        let vals: Vec<f64> = boot.iter().map(f).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
    };

    Ok(EmpiricalCorrection {
        m_hat: amp * amp,
        std_err: sd(&|b| b[0] * b[0]),
        amplitude: amp,
        amplitude_std_err: sd(&|b| b[0]),
        second_harmonic: second,
        second_harmonic_std_err: sd(&|b| b[1]),
        realizations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuned() -> PsdSpec {
        PsdSpec::flat_band_for(0.01, 1.0, 10.0).unwrap()
    }

    #[test]
    fn zero_spectrum_is_silent() {
        let spec = PsdSpec::flat_band(0.0, 1.0, 10.0).unwrap();
        let p = generate_phase_process(&spec, 50.0, 0.03, 7).unwrap();
        assert!(p.delta.iter().all(|&d| d == 0.0));
        assert!(p.theta.iter().all(|&t| t == 0.0));
        let e = empirical_correction_factor(&spec, 100, 50.0, 0.03, 7).unwrap();
        assert_eq!(e.m_hat, 1.0);
        assert_eq!(e.std_err, 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_phase_process(&tuned(), 40.0, 0.03, 11).unwrap();
        let b = generate_phase_process(&tuned(), 40.0, 0.03, 11).unwrap();
        let c = generate_phase_process(&tuned(), 40.0, 0.03, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.delta, c.delta);
    }

    #[test]
    fn theta_is_trapezoid_of_delta() {
        let p = generate_phase_process(&tuned(), 40.0, 0.03, 3).unwrap();
        assert_eq!(p.theta[0], 0.0);
        let mut acc = 0.0;
        for n in 1..p.len() {
            acc += 0.5 * p.dt * (p.delta[n - 1] + p.delta[n]);
            assert!((p.theta[n] - acc).abs() <= 1e-12 * (1.0 + acc.abs()));
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let spec = tuned();
        assert!(generate_phase_process(&spec, 40.0, 0.4, 1).is_err()); // dt·ω_high > π
        assert!(generate_phase_process(&spec, -1.0, 0.01, 1).is_err());
        assert!(generate_phase_process(&spec, 5.0, 0.01, 1).is_err()); // < 1024 samples
        assert!(empirical_correction_factor(&spec, 99, 40.0, 0.03, 1).is_err());
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let p = generate_phase_process(&tuned(), 40.0, 0.03, 3).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,delta,theta"));
        assert_eq!(lines.count(), p.len());
    }

    #[test]
    fn discrete_phase_variance_matches_spectrum() {
        // Time-averaged Var θ of the synthesized process is 2 Σ v_k/ω_k².
        let spec = tuned();
        let (n, dt) = (4096, 0.0314);
        let dw = 2.0 * PI / (n as f64 * dt);
        let total: f64 = bin_variances(&spec, n, dt)
            .unwrap()
            .iter()
            .map(|&(k, v)| 2.0 * v / (k as f64 * dw).powi(2))
            .sum();
        let target = spec.phase_variance().unwrap();
        assert!((total - target).abs() / target < 1e-10, "{total} vs {target}");
    }
}
