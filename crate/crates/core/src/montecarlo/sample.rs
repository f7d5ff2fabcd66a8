use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::chaos::{correction_factor_from_psd, PsdSpec};
use crate::network::{Interference, QcdmaParams, User};
use crate::seed::{stream_rng, DOMAIN_SAMPLES};
use crate::{Error, Result};

/// Smallest batch the simulators accept.
pub const MIN_SAMPLES: usize = 10_000;

/// Samples drawn from one RNG stream. Fixed so that a batch does not depend
/// on the thread count.
const CHUNK: usize = 1 << 14;

/// Relative tolerance between a PSD's correction factor and the configured
/// one in the explicit-phase model.
pub const CORRECTION_MATCH_TOL: f64 = 0.05;

/// Column of a [`SampleBatch`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(usize)]
pub enum Col {
    /// Alice 1's Gaussian displacement (x).
    S1,
    S2,
    A1X,
    A1Y,
    A2X,
    A2Y,
    /// Eve's injected EPR mode.
    NX,
    NY,
    /// Eve's kept EPR twin.
    NPX,
    NPY,
    /// Receiver-side environment mode.
    BSX,
    BSY,
    /// Interference seen by Bob 1 (x).
    I1X,
    I2X,
    /// Known displacement of the interference seen by Bob 1.
    SI1,
    SI2,
    /// Bob's measured quadratures.
    XB1,
    XB2,
    /// Eve's channel output mode as seen against Bob 1 / Bob 2.
    X81,
    X82,
    /// Chaotic phases (zero in the averaged model).
    Theta1,
    Theta2,
}

pub const NCOL: usize = 22;

impl Col {
    pub const ALL: [Col; NCOL] = [
        Col::S1,
        Col::S2,
        Col::A1X,
        Col::A1Y,
        Col::A2X,
        Col::A2Y,
        Col::NX,
        Col::NY,
        Col::NPX,
        Col::NPY,
        Col::BSX,
        Col::BSY,
        Col::I1X,
        Col::I2X,
        Col::SI1,
        Col::SI2,
        Col::XB1,
        Col::XB2,
        Col::X81,
        Col::X82,
        Col::Theta1,
        Col::Theta2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Col::S1 => "s_1",
            Col::S2 => "s_2",
            Col::A1X => "x_a1",
            Col::A1Y => "y_a1",
            Col::A2X => "x_a2",
            Col::A2Y => "y_a2",
            Col::NX => "x_n",
            Col::NY => "y_n",
            Col::NPX => "x_n_twin",
            Col::NPY => "y_n_twin",
            Col::BSX => "x_bs",
            Col::BSY => "y_bs",
            Col::I1X => "x_i1",
            Col::I2X => "x_i2",
            Col::SI1 => "s_i1",
            Col::SI2 => "s_i2",
            Col::XB1 => "x_b1",
            Col::XB2 => "x_b2",
            Col::X81 => "x_e1",
            Col::X82 => "x_e2",
            Col::Theta1 => "theta_1",
            Col::Theta2 => "theta_2",
        }
    }

    pub fn bob(u: User) -> Col {
        match u {
            User::One => Col::XB1,
            User::Two => Col::XB2,
        }
    }

    pub fn eve(u: User) -> Col {
        match u {
            User::One => Col::X81,
            User::Two => Col::X82,
        }
    }

    pub fn displacement(u: User) -> Col {
        match u {
            User::One => Col::S1,
            User::Two => Col::S2,
        }
    }

    pub fn interference_displacement(u: User) -> Col {
        match u {
            User::One => Col::SI1,
            User::Two => Col::SI2,
        }
    }

    pub fn theta(u: User) -> Col {
        match u {
            User::One => Col::Theta1,
            User::Two => Col::Theta2,
        }
    }
}

pub type Row = [f64; NCOL];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Model {
    /// Phase factors replaced by their averages.
    Averaged,
    /// Phases drawn per sample and applied as rotations.
    ExplicitPhase,
}

/// Phase-space samples of every mode in the link, one row per channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub model: Model,
    pub seed: u64,
    rows: Vec<Row>,
}

impl SampleBatch {
    /// Wraps externally produced rows.
    pub fn from_rows(model: Model, seed: u64, rows: Vec<Row>) -> Self {
        SampleBatch { model, seed, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn get(&self, i: usize, c: Col) -> f64 {
        self.rows[i][c as usize]
    }

    pub fn column(&self, c: Col) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[c as usize])
    }
}

fn check_len(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::param("samples", format!("needs at least {MIN_SAMPLES}, got {n}")));
    }
    Ok(())
}

/// Generates `n` rows chunk by chunk, each chunk from its own stream.
fn generate<F>(n: usize, seed: u64, fill: F) -> Vec<Row>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, &mut Row) + Sync,
{
    let mut rows = vec![[0.0; NCOL]; n];
    rows.par_chunks_mut(CHUNK).enumerate().for_each(|(k, chunk)| {
        let mut rng = stream_rng(seed, DOMAIN_SAMPLES, k as u64);
        for row in chunk {
            fill(&mut rng, row);
        }
    });
    rows
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws the modes shared by both models: sources, EPR pair, environment.
struct Modes {
    epr_a: f64,
    epr_b: f64,
    sd_s: [f64; 2],
    sd_0: [f64; 2],
    sd_sigma: f64,
}

impl Modes {
    fn new(p: &QcdmaParams) -> Self {
        let w = p.channel.w;
        let c = (w * w - 1.0).sqrt();
        Modes {
            epr_a: ((w + c) / 2.0).sqrt(),
            epr_b: ((w - c) / 2.0).max(0.0).sqrt(),
            sd_s: [p.user1.v_s.sqrt(), p.user2.v_s.sqrt()],
            sd_0: [p.user1.v_0.sqrt(), p.user2.v_0.sqrt()],
            sd_sigma: p.channel.sigma.sqrt(),
        }
    }

    fn draw(&self, rng: &mut impl Rng, r: &mut Row) {
        for (u, (s, x, y)) in [(Col::S1, Col::A1X, Col::A1Y), (Col::S2, Col::A2X, Col::A2Y)]
            .into_iter()
            .enumerate()
        {
            let sx = self.sd_s[u] * normal(rng);
            let sy = self.sd_s[u] * normal(rng);
            r[s as usize] = sx;
            r[x as usize] = sx + self.sd_0[u] * normal(rng);
            r[y as usize] = sy + self.sd_0[u] * normal(rng);
        }
        // X correlated, Y anti-correlated.
        let (z1, z2, z3, z4) = (normal(rng), normal(rng), normal(rng), normal(rng));
        r[Col::NX as usize] = self.epr_a * z1 + self.epr_b * z2;
        r[Col::NPX as usize] = self.epr_a * z1 - self.epr_b * z2;
        r[Col::NY as usize] = self.epr_b * z3 + self.epr_a * z4;
        r[Col::NPY as usize] = self.epr_b * z3 - self.epr_a * z4;
        r[Col::BSX as usize] = self.sd_sigma * normal(rng);
        r[Col::BSY as usize] = self.sd_sigma * normal(rng);
    }
}

/// Samples the link with every phase factor replaced by its average:
///
/// `X_Bu = (√η/2)X_Au + √(M_u(1−η)/2)X_N + (√(M₁M₂η)/2)X_Iu ± √(M_u/2)X_BS`
///
/// with `+` for Bob 1 and `−` for Bob 2, and Eve's output
/// `X_8 = √η X_N − √(M_u(1−η)/2)X_Au − √(M_j(1−η)/2)X_Iu`.
pub fn simulate_averaged(p: &QcdmaParams, n: usize, seed: u64) -> Result<SampleBatch> {
    p.validate()?;
    check_len(n)?;
    let modes = Modes::new(p);
    let eta = p.channel.eta;
    let m = [p.m1.value(), p.m2.value()];
    let fixed = match p.interference {
        Interference::Interferer => None,
        Interference::Fixed { gamma, gamma0 } => Some(((gamma - gamma0).sqrt(), gamma0.sqrt())),
    };
    let rows = generate(n, seed, |rng, r| {
        modes.draw(rng, r);
        for u in User::BOTH {
            let (i_col, si_col) = match u {
                User::One => (Col::I1X, Col::SI1),
                User::Two => (Col::I2X, Col::SI2),
            };
            let (xi, si) = match fixed {
                None => {
                    let j = u.other();
                    let a = if j == User::One { Col::A1X } else { Col::A2X };
                    (r[a as usize], r[Col::displacement(j) as usize])
                }
                Some((sd_s, sd_0)) => {
                    let s = sd_s * normal(rng);
                    (s + sd_0 * normal(rng), s)
                }
            };
            r[i_col as usize] = xi;
            r[si_col as usize] = si;
        }
        for u in User::BOTH {
            let mu = m[u.index()];
            let mj = m[u.other().index()];
            let xa = r[if u == User::One { Col::A1X } else { Col::A2X } as usize];
            let xi = r[if u == User::One { Col::I1X } else { Col::I2X } as usize];
            let sign = if u == User::One { 1.0 } else { -1.0 };
            let xn = r[Col::NX as usize];
            r[Col::bob(u) as usize] = 0.5 * eta.sqrt() * xa
                + (mu * (1.0 - eta) / 2.0).sqrt() * xn
                + 0.5 * (m[0] * m[1] * eta).sqrt() * xi
                + sign * (mu / 2.0).sqrt() * r[Col::BSX as usize];
            r[Col::eve(u) as usize] =
                eta.sqrt() * xn - (mu * (1.0 - eta) / 2.0).sqrt() * xa - (mj * (1.0 - eta) / 2.0).sqrt() * xi;
        }
        r[Col::Theta1 as usize] = 0.0;
        r[Col::Theta2 as usize] = 0.0;
    });
    Ok(SampleBatch {
        model: Model::Averaged,
        seed,
        rows,
    })
}

/// `(x, y)` of `a·e^{iφ}`.
fn rotate((x, y): (f64, f64), phi: f64) -> (f64, f64) {
    let (s, c) = phi.sin_cos();
    (x * c - y * s, x * s + y * c)
}

fn mix((x1, y1): (f64, f64), (x2, y2): (f64, f64), t: f64, r: f64) -> (f64, f64) {
    (t * x1 + r * x2, t * y1 + r * y2)
}

/// Samples the link with a fresh chaotic phase per user and channel use,
/// applying the full rotations through encoding, both beamsplitters, Eve's
/// cloner and decoding.
///
/// Phases come from the stationary Gaussian distribution of each spectrum,
/// with variance `π∫S/ω²`. The interferer at each Bob is the other user's
/// mode, whatever `p.interference` says.
pub fn simulate_explicit_phase(
    p: &QcdmaParams,
    psd1: &PsdSpec,
    psd2: &PsdSpec,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    p.validate()?;
    check_len(n)?;
    let mut sd_theta = [0.0; 2];
    for (u, psd) in [(User::One, psd1), (User::Two, psd2)] {
        let from_psd = correction_factor_from_psd(psd)?.value();
        let configured = p.m(u);
        if (from_psd - configured).abs() > CORRECTION_MATCH_TOL * configured {
            return Err(Error::CorrectionMismatch {
                user: u.number(),
                from_psd,
                configured,
            });
        }
        sd_theta[u.index()] = psd.phase_variance()?.sqrt();
    }
    let modes = Modes::new(p);
    let eta = p.channel.eta;
    let (t, l) = (eta.sqrt(), (1.0 - eta).sqrt());
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let rows = generate(n, seed, |rng, r| {
        modes.draw(rng, r);
        let th1 = sd_theta[0] * normal(rng);
        let th2 = sd_theta[1] * normal(rng);
        let q = |x: Col, y: Col| (r[x as usize], r[y as usize]);
        let a1 = rotate(q(Col::A1X, Col::A1Y), -th1);
        let a2 = rotate(q(Col::A2X, Col::A2Y), -th2);
        let a5 = mix(a1, a2, h, h);
        let an = q(Col::NX, Col::NY);
        let a7 = mix(a5, an, t, l);
        let a8 = mix(an, a5, t, -l);
        let bs = q(Col::BSX, Col::BSY);
        let a3 = rotate(mix(a7, bs, h, h), th1);
        let a4 = rotate(mix(a7, bs, h, -h), th2);

        r[Col::I1X as usize] = r[Col::A2X as usize];
        r[Col::SI1 as usize] = r[Col::S2 as usize];
        r[Col::I2X as usize] = r[Col::A1X as usize];
        r[Col::SI2 as usize] = r[Col::S1 as usize];
        r[Col::XB1 as usize] = a3.0;
        r[Col::XB2 as usize] = a4.0;
        r[Col::X81 as usize] = a8.0;
        r[Col::X82 as usize] = a8.0;
        r[Col::Theta1 as usize] = th1;
        r[Col::Theta2 as usize] = th2;
    });
    Ok(SampleBatch {
        model: Model::ExplicitPhase,
        seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::CorrectionFactor;
    use crate::network::{ChannelParams, UserParams};

    fn params(m: f64) -> QcdmaParams {
        QcdmaParams::symmetric(
            UserParams::new(10.0, 1.0).unwrap(),
            ChannelParams::with_eta(0.6, 2.0, 1.5).unwrap(),
            CorrectionFactor::new(m).unwrap(),
        )
    }

    #[test]
    fn rejects_small_batches() {
        assert!(simulate_averaged(&params(0.5), MIN_SAMPLES - 1, 1).is_err());
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let p = params(0.5);
        let a = simulate_averaged(&p, 40_000, 7).unwrap();
        let b = simulate_averaged(&p, 40_000, 7).unwrap();
        let c = simulate_averaged(&p, 40_000, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.rows()[0], c.rows()[0]);
        // A prefix is stable under growing n.
        let d = simulate_averaged(&p, 50_000, 7).unwrap();
        assert_eq!(&d.rows()[..40_000], a.rows());
    }

    #[test]
    fn epr_pair_moments() {
        let p = params(1.0);
        let b = simulate_averaged(&p, 200_000, 3).unwrap();
        let n = b.len() as f64;
        let cov = |x: Col, y: Col| b.rows().iter().map(|r| r[x as usize] * r[y as usize]).sum::<f64>() / n;
        let c = 3f64.sqrt();
        assert!((cov(Col::NX, Col::NX) - 2.0).abs() < 0.03);
        assert!((cov(Col::NPY, Col::NPY) - 2.0).abs() < 0.03);
        assert!((cov(Col::NX, Col::NPX) - c).abs() < 0.03);
        assert!((cov(Col::NY, Col::NPY) + c).abs() < 0.03);
        assert!(cov(Col::NX, Col::NY).abs() < 0.03);
    }

    #[test]
    fn rotation() {
        let (x, y) = rotate((1.0, 0.0), std::f64::consts::FRAC_PI_2);
        assert!(x.abs() < 1e-15 && (y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn explicit_without_phase_noise_matches_averaged_combination() {
        let p = params(1.0);
        let flat = PsdSpec::flat_band(0.0, 1.0, 10.0).unwrap();
        let b = simulate_explicit_phase(&p, &flat, &flat, MIN_SAMPLES, 11).unwrap();
        let eta: f64 = 0.6;
        for r in b.rows() {
            let expect = 0.5 * eta.sqrt() * (r[Col::A1X as usize] + r[Col::A2X as usize])
                + ((1.0 - eta) / 2.0).sqrt() * r[Col::NX as usize]
                + r[Col::BSX as usize] / 2f64.sqrt();
            assert!((r[Col::XB1 as usize] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn explicit_checks_correction_factor() {
        let p = params(0.01);
        let psd = PsdSpec::flat_band_for(0.02, 1.0, 10.0).unwrap();
        assert!(matches!(
            simulate_explicit_phase(&p, &psd, &psd, MIN_SAMPLES, 1),
            Err(Error::CorrectionMismatch { user: 1, .. })
        ));
        let ok = PsdSpec::flat_band_for(0.0104, 1.0, 10.0).unwrap();
        assert!(simulate_explicit_phase(&p, &ok, &ok, MIN_SAMPLES, 1).is_ok());
    }
}
