//! Covariance-matrix algebra for one- and two-mode Gaussian states.
//!
//! Quadratures are ordered `(x1, p1, x2, p2)` and variances are in shot-noise
//! units (vacuum variance 1), so a physical state has every symplectic
//! eigenvalue `>= 1`.

use nalgebra::{Matrix2, Matrix4, Vector4};

use crate::{Error, Result};

/// Slack below 1 tolerated for symplectic eigenvalues before a state counts
/// as sub-vacuum.
pub const VACUUM_TOLERANCE: f64 = 1e-9;

/// Two-mode covariance matrix `[[A, D], [Dᵀ, B]]` in 2×2 blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeCovariance {
    a: Matrix2<f64>,
    b: Matrix2<f64>,
    d: Matrix2<f64>,
}

impl TwoModeCovariance {
    /// Builds a covariance matrix, checking that the diagonal blocks are
    /// symmetric with positive diagonal.
    pub fn new(a: Matrix2<f64>, b: Matrix2<f64>, d: Matrix2<f64>) -> Result<Self> {
        for (name, m) in [("blockA", &a), ("blockB", &b)] {
            if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-12 * m.amax().max(1.0) {
                return Err(Error::param(name, "block is not symmetric"));
            }
            if !(m[(0, 0)] > 0.0 && m[(1, 1)] > 0.0) {
                return Err(Error::param(name, "diagonal must be positive"));
            }
        }
        if !(a.iter().chain(b.iter()).chain(d.iter()).all(|v| v.is_finite())) {
            return Err(Error::param("cm", "entries must be finite"));
        }
        Ok(TwoModeCovariance { a, b, d })
    }

    /// Two vacua.
    pub fn vacuum() -> Self {
        Self::from_diagonals([1.0, 1.0], [1.0, 1.0], [0.0, 0.0])
    }

    /// The symmetric form `[[a·I, c·Z], [c·Z, b·I]]` shared by thermal states,
    /// EPR pairs and the entangling cloner.
    pub fn symmetric_form(a: f64, b: f64, c: f64) -> Self {
        Self::from_diagonals([a, a], [b, b], [c, -c])
    }

    /// Covariance matrix with diagonal blocks `diag(a)`, `diag(b)`, `diag(d)`.
    pub fn from_diagonals(a: [f64; 2], b: [f64; 2], d: [f64; 2]) -> Self {
        TwoModeCovariance {
            a: Matrix2::new(a[0], 0.0, 0.0, a[1]),
            b: Matrix2::new(b[0], 0.0, 0.0, b[1]),
            d: Matrix2::new(d[0], 0.0, 0.0, d[1]),
        }
    }

    pub fn block_a(&self) -> &Matrix2<f64> {
        &self.a
    }

    pub fn block_b(&self) -> &Matrix2<f64> {
        &self.b
    }

    pub fn block_d(&self) -> &Matrix2<f64> {
        &self.d
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.a);
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(&self.b);
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(&self.d);
        m.fixed_view_mut::<2, 2>(2, 0).copy_from(&self.d.transpose());
        m
    }

    /// Whether every block is diagonal, i.e. x and p quadratures never mix.
    pub fn is_quadrature_decoupled(&self) -> bool {
        [self.a, self.b, self.d]
            .iter()
            .all(|m| m[(0, 1)] == 0.0 && m[(1, 0)] == 0.0)
    }

    pub fn determinant(&self) -> f64 {
        if self.is_quadrature_decoupled() {
            let (x, p) = self.quadrature_blocks();
            x.determinant() * p.determinant()
        } else {
            self.to_matrix().determinant()
        }
    }

    /// The two-mode invariant `det A + det B + 2 det D`.
    pub fn seralian(&self) -> f64 {
        self.a.determinant() + self.b.determinant() + 2.0 * self.d.determinant()
    }

    /// The x-quadrature and p-quadrature 2×2 covariance matrices of a
    /// decoupled state.
    fn quadrature_blocks(&self) -> (Matrix2<f64>, Matrix2<f64>) {
        let x = Matrix2::new(self.a[(0, 0)], self.d[(0, 0)], self.d[(0, 0)], self.b[(0, 0)]);
        let p = Matrix2::new(self.a[(1, 1)], self.d[(1, 1)], self.d[(1, 1)], self.b[(1, 1)]);
        (x, p)
    }
}

/// Symplectic eigenvalues of a two-mode state, stored squared and in
/// descending order.
///
/// Squares can be negative for matrices that are not positive definite; such
/// a spectrum is never physical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticSpectrum {
    squared: [f64; 2],
}

impl SymplecticSpectrum {
    pub fn from_values(mut values: [f64; 2]) -> Self {
        values.sort_by(|x, y| y.total_cmp(x));
        SymplecticSpectrum {
            squared: [values[0] * values[0], values[1] * values[1]],
        }
    }

    pub fn from_squared(mut squared: [f64; 2]) -> Self {
        squared.sort_by(|x, y| y.total_cmp(x));
        SymplecticSpectrum { squared }
    }

    /// `ν_k`, descending. A negative square maps to `NaN`.
    pub fn values(&self) -> [f64; 2] {
        self.squared.map(f64::sqrt)
    }

    pub fn squared(&self) -> [f64; 2] {
        self.squared
    }

    /// `ν₁²ν₂²`, equal to the determinant of the covariance matrix.
    pub fn product_squared(&self) -> f64 {
        self.squared[0] * self.squared[1]
    }

    /// True if every eigenvalue is at least `1 - VACUUM_TOLERANCE`.
    pub fn is_physical(&self) -> bool {
        let floor = 1.0 - VACUUM_TOLERANCE;
        self.squared.iter().all(|&s| s >= floor * floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMethod {
    /// `ν² = (Δ ± √(Δ² − 4 det Σ))/2`.
    ClosedForm,
    /// Moduli of the eigenvalues of `iΩΣ` from a dense eigensolver.
    Generic,
}

/// Symplectic spectrum of a two-mode covariance matrix.
pub fn symplectic_spectrum(cm: &TwoModeCovariance, method: SpectrumMethod) -> Result<SymplecticSpectrum> {
    match method {
        SpectrumMethod::ClosedForm => closed_form_spectrum(cm),
        SpectrumMethod::Generic => generic_spectrum(&cm.to_matrix()),
    }
}

fn closed_form_spectrum(cm: &TwoModeCovariance) -> Result<SymplecticSpectrum> {
    let delta = cm.seralian();
    let det = cm.determinant();
    let disc = if cm.is_quadrature_decoupled() {
        // Same quantity as Δ² − 4 det Σ, written without the cancellation that
        // destroys accuracy when the two eigenvalues nearly coincide.
        let (x, p) = cm.quadrature_blocks();
        let (a1, d1, b1) = (x[(0, 0)], x[(0, 1)], x[(1, 1)]);
        let (a2, d2, b2) = (p[(0, 0)], p[(0, 1)], p[(1, 1)]);
        let diff = a1 * a2 - b1 * b2;
        diff * diff + 4.0 * (a1 * d2 + d1 * b2) * (d1 * a2 + b1 * d2)
    } else {
        delta * delta - 4.0 * det
    };
    if disc < -1e-9 * delta.abs().max(1.0).powi(2) {
        return Err(Error::NonPhysical(format!(
            "symplectic discriminant {disc:e} is negative"
        )));
    }
    let root = disc.max(0.0).sqrt();
    // Larger-magnitude root directly, the other through the product `det`.
    let far = if delta >= 0.0 { 0.5 * (delta + root) } else { 0.5 * (delta - root) };
    let near = if far != 0.0 { det / far } else { 0.0 };
    Ok(SymplecticSpectrum::from_squared([far, near]))
}

/// The standard symplectic form `⊕ [[0, 1], [−1, 0]]`.
pub fn symplectic_form() -> Matrix4<f64> {
    let mut omega = Matrix4::zeros();
    omega[(0, 1)] = 1.0;
    omega[(1, 0)] = -1.0;
    omega[(2, 3)] = 1.0;
    omega[(3, 2)] = -1.0;
    omega
}

/// Symplectic spectrum of an arbitrary real 4×4 covariance matrix.
///
/// The eigenvalues of `ΩΣ` come in pairs `±iν`; `ν² = −λ²`, which stays real
/// (and turns negative) when `Σ` is indefinite.
pub fn generic_spectrum(sigma: &Matrix4<f64>) -> Result<SymplecticSpectrum> {
    let m = symplectic_form() * sigma;
    let eig = m.complex_eigenvalues();
    let scale = sigma.amax().max(1.0);
    let mut sq: Vec<f64> = Vec::with_capacity(4);
    for lambda in eig.iter() {
        let s = -(lambda * lambda);
        if s.im.abs() > 1e-7 * scale * scale {
            return Err(Error::NonPhysical(format!(
                "complex symplectic eigenvalue {lambda}"
            )));
        }
        sq.push(s.re);
    }
    sq.sort_by(|x, y| y.total_cmp(x));
    // Each ν² appears twice.
    Ok(SymplecticSpectrum::from_squared([
        0.5 * (sq[0] + sq[1]),
        0.5 * (sq[2] + sq[3]),
    ]))
}

/// Entropy `g(x)` in bits of a thermal mode with symplectic eigenvalue `x`.
///
/// Arguments within [`VACUUM_TOLERANCE`] below 1 are treated as 1.
pub fn g_entropy(x: f64) -> Result<f64> {
    if x.is_nan() || x < 1.0 - VACUUM_TOLERANCE {
        return Err(Error::EntropyDomain(x));
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let e = 0.5 * (x - 1.0).max(0.0);
    if e == 0.0 {
        return Ok(0.0);
    }
    // ((x+1)/2) log((x+1)/2) - ((x-1)/2) log((x-1)/2) with (x+1)/2 = 1 + e.
    Ok(((1.0 + e) * e.ln_1p() - e * e.ln()) / std::f64::consts::LN_2)
}

/// `S = Σ g(ν_k)`, failing on sub-vacuum eigenvalues.
pub fn von_neumann_entropy(spectrum: &SymplecticSpectrum) -> Result<f64> {
    spectrum
        .squared()
        .iter()
        .map(|&s| if s < 0.0 { Err(Error::EntropyDomain(-(-s).sqrt())) } else { g_entropy(s.sqrt()) })
        .sum()
}

/// Like [`von_neumann_entropy`], but sub-vacuum eigenvalues contribute zero.
///
/// Returns the entropy and whether any eigenvalue had to be clamped.
pub fn von_neumann_entropy_clamped(spectrum: &SymplecticSpectrum) -> (f64, bool) {
    let mut clamped = false;
    let mut total = 0.0;
    for &s in spectrum.squared().iter() {
        if s >= 1.0 {
            total += g_entropy(s.sqrt()).unwrap_or(0.0);
        } else {
            if s < (1.0 - VACUUM_TOLERANCE).powi(2) {
                clamped = true;
            }
        }
    }
    (total, clamped)
}

/// Cross-covariances between a measured quadrature and the two modes of a
/// state, in the form `C = [ξ·I₂; ψ·Z]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCovariance {
    pub xi: f64,
    pub psi: f64,
}

impl CrossCovariance {
    /// The first column of `C`, which is all `C Π Cᵀ` depends on.
    pub fn measured_column(&self) -> Vector4<f64> {
        Vector4::new(self.xi, 0.0, self.psi, 0.0)
    }
}

/// Conditions `cm` on a homodyne measurement of the x quadrature of a
/// correlated mode with variance `measured_var`: `Σ − C Π Cᵀ / V`.
pub fn homodyne_condition(
    cm: &TwoModeCovariance,
    cross: CrossCovariance,
    measured_var: f64,
) -> Result<TwoModeCovariance> {
    if !(measured_var > 0.0) {
        return Err(Error::param("measuredVar", format!("must be positive, got {measured_var}")));
    }
    let CrossCovariance { xi, psi } = cross;
    let mut out = *cm;
    out.a[(0, 0)] -= xi * xi / measured_var;
    out.b[(0, 0)] -= psi * psi / measured_var;
    out.d[(0, 0)] -= xi * psi / measured_var;
    Ok(out)
}

/// The same update as [`homodyne_condition`] carried out with full 4×4
/// matrix products, `Σ − C Π Cᵀ / V` with `C` the 4×2 cross-covariance.
pub fn homodyne_condition_matrix(
    sigma: &Matrix4<f64>,
    cross: &nalgebra::Matrix4x2<f64>,
    measured_var: f64,
) -> Result<Matrix4<f64>> {
    if !(measured_var > 0.0) {
        return Err(Error::param("measuredVar", format!("must be positive, got {measured_var}")));
    }
    let pi = Matrix2::new(1.0, 0.0, 0.0, 0.0);
    Ok(sigma - cross * pi * cross.transpose() / measured_var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cloner(eta: f64, v5: f64, w: f64) -> TwoModeCovariance {
        let ev = (1.0 - eta) * v5 + eta * w;
        let phi = (eta * (w * w - 1.0)).sqrt();
        TwoModeCovariance::symmetric_form(ev, w, phi)
    }

    #[test]
    fn g_exact_points() {
        assert_eq!(g_entropy(1.0).unwrap(), 0.0);
        assert_eq!(g_entropy(3.0).unwrap(), 2.0);
        // 1.5·log₂1.5 + 0.5, 40-digit evaluation
        assert_relative_eq!(g_entropy(2.0).unwrap(), 1.377_443_751_081_734_3, max_relative = 1e-14);
    }

    #[test]
    fn g_domain() {
        assert_eq!(g_entropy(1.0 - 1e-10).unwrap(), 0.0);
        assert!(matches!(g_entropy(0.99), Err(Error::EntropyDomain(_))));
        assert!(g_entropy(f64::NAN).is_err());
    }

    #[test]
    fn g_is_smooth_near_one() {
        // first-order expansion e·(1 − ln e)/ln2 with e = (x−1)/2
        let x = 1.0 + 1e-12;
        let e: f64 = 0.5 * (x - 1.0);
        let expect = e * (1.0 - e.ln()) / std::f64::consts::LN_2;
        assert_relative_eq!(g_entropy(x).unwrap(), expect, max_relative = 1e-9);
    }

    #[test]
    fn g_large_argument_asymptote() {
        let x = 1e4;
        let lead = (x * std::f64::consts::E / 2.0).log2();
        assert!((g_entropy(x).unwrap() - lead).abs() < 1e-3);
    }

    #[test]
    fn vacuum_spectrum() {
        let cm = TwoModeCovariance::vacuum();
        for method in [SpectrumMethod::ClosedForm, SpectrumMethod::Generic] {
            let s = symplectic_spectrum(&cm, method).unwrap();
            assert_relative_eq!(s.values()[0], 1.0, epsilon = 1e-12);
            assert_relative_eq!(s.values()[1], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn product_state_spectrum() {
        let s = symplectic_spectrum(&cloner(0.0, 3.0, 2.0), SpectrumMethod::ClosedForm).unwrap();
        assert_relative_eq!(s.values()[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(s.values()[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn half_transmission_spectrum() {
        // numpy eigvals of ΩΣ: 2.1374586088176897, 1.6374586088176875
        for method in [SpectrumMethod::ClosedForm, SpectrumMethod::Generic] {
            let s = symplectic_spectrum(&cloner(0.5, 3.0, 2.0), method).unwrap();
            assert_relative_eq!(s.values()[0], 2.137_458_608_817_69, max_relative = 1e-12);
            assert_relative_eq!(s.values()[1], 1.637_458_608_817_69, max_relative = 1e-12);
        }
    }

    #[test]
    fn pure_epr_is_exactly_pure() {
        let s = symplectic_spectrum(&cloner(1.0, 50.0, 10.0), SpectrumMethod::ClosedForm).unwrap();
        assert!(von_neumann_entropy(&s).unwrap() < 1e-11);
    }

    #[test]
    fn entropy_of_spectra() {
        let s = |v: [f64; 2]| SymplecticSpectrum::from_values(v);
        assert_eq!(von_neumann_entropy(&s([1.0, 1.0])).unwrap(), 0.0);
        assert_eq!(von_neumann_entropy(&s([3.0, 1.0])).unwrap(), 2.0);
        assert_relative_eq!(
            von_neumann_entropy(&s([2.0, 2.0])).unwrap(),
            2.754_887_502_163_468_5,
            max_relative = 1e-14
        );
        assert!(von_neumann_entropy(&s([2.0, 0.5])).is_err());
        assert!(von_neumann_entropy(&SymplecticSpectrum::from_squared([2.0, -0.5])).is_err());
    }

    #[test]
    fn clamped_entropy_flags_sub_vacuum() {
        let (bits, clamped) = von_neumann_entropy_clamped(&SymplecticSpectrum::from_values([3.0, 0.5]));
        assert_eq!(bits, 2.0);
        assert!(clamped);
        let (_, clamped) = von_neumann_entropy_clamped(&SymplecticSpectrum::from_values([3.0, 1.0 - 1e-12]));
        assert!(!clamped);
    }

    #[test]
    fn conditioning_without_correlation_is_identity() {
        let cm = cloner(0.3, 20.0, 3.0);
        let out = homodyne_condition(&cm, CrossCovariance { xi: 0.0, psi: 0.0 }, 5.0).unwrap();
        assert_eq!(out, cm);
    }

    #[test]
    fn conditioning_rank_one_update() {
        let cm = TwoModeCovariance::from_diagonals([2.0, 2.0], [2.0, 2.0], [0.0, 0.0]);
        let out = homodyne_condition(&cm, CrossCovariance { xi: 1.0, psi: 0.0 }, 2.0).unwrap();
        assert_eq!(*out.block_a(), Matrix2::new(1.5, 0.0, 0.0, 2.0));
        assert_eq!(out.block_b(), cm.block_b());
        assert_eq!(out.block_d(), cm.block_d());
    }

    #[test]
    fn conditioning_rejects_bad_variance() {
        let cm = TwoModeCovariance::vacuum();
        let c = CrossCovariance { xi: 1.0, psi: 0.0 };
        assert!(homodyne_condition(&cm, c, 0.0).is_err());
        assert!(homodyne_condition(&cm, c, -1.0).is_err());
    }

    #[test]
    fn indefinite_matrix_has_negative_square() {
        let cm = TwoModeCovariance::from_diagonals([-0.5, 2.0], [1.0, 1.0], [0.0, 0.0]);
        for method in [SpectrumMethod::ClosedForm, SpectrumMethod::Generic] {
            let s = symplectic_spectrum(&cm, method).unwrap();
            assert_relative_eq!(s.squared()[1], -1.0, epsilon = 1e-12);
            assert!(!s.is_physical());
        }
    }

    #[test]
    fn new_validates_blocks() {
        let i = Matrix2::identity();
        assert!(TwoModeCovariance::new(Matrix2::new(1.0, 0.5, 0.0, 1.0), i, Matrix2::zeros()).is_err());
        assert!(TwoModeCovariance::new(i, Matrix2::new(-1.0, 0.0, 0.0, 1.0), Matrix2::zeros()).is_err());
        assert!(TwoModeCovariance::new(i, i, Matrix2::zeros()).is_ok());
    }

    #[test]
    fn coupled_blocks_use_general_formula() {
        // Beam-splitter mixed squeezed states: not quadrature-decoupled.
        let a = Matrix2::new(2.0, 0.3, 0.3, 1.5);
        let b = Matrix2::new(1.8, -0.2, -0.2, 2.2);
        let d = Matrix2::new(0.4, 0.1, -0.1, 0.2);
        let cm = TwoModeCovariance::new(a, b, d).unwrap();
        assert!(!cm.is_quadrature_decoupled());
        let c = symplectic_spectrum(&cm, SpectrumMethod::ClosedForm).unwrap();
        let g = symplectic_spectrum(&cm, SpectrumMethod::Generic).unwrap();
        for k in 0..2 {
            assert_relative_eq!(c.squared()[k], g.squared()[k], max_relative = 1e-10);
        }
    }

    fn cloner_params() -> impl Strategy<Value = (f64, f64, f64)> {
        (1e-6..1.0 - 1e-6, 1.0..200.0f64, 1.0..10.0f64)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn closed_form_matches_generic((eta, v5, w) in cloner_params()) {
            let cm = cloner(eta, v5, w);
            let c = symplectic_spectrum(&cm, SpectrumMethod::ClosedForm).unwrap();
            let g = symplectic_spectrum(&cm, SpectrumMethod::Generic).unwrap();
            for k in 0..2 {
                let (x, y) = (c.values()[k], g.values()[k]);
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(y.abs()), "{x} vs {y}");
            }
            let det = cm.to_matrix().determinant();
            prop_assert!((c.product_squared() - det).abs() <= 1e-8 * det.abs());
            prop_assert!(c.is_physical());
        }

        #[test]
        fn g_strictly_increasing(x in 1.0..1e4f64, step in 1e-6..10.0f64) {
            prop_assert!(g_entropy(x + step).unwrap() > g_entropy(x).unwrap());
        }
    }
}
