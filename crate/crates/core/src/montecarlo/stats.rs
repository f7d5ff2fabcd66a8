use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::sample::{Col, Model, Row, SampleBatch, MIN_SAMPLES};
use crate::chaos::CorrectionFactor;
use crate::network::{self, CrossMode, QcdmaParams, User};
use crate::seed::{stream_rng, DOMAIN_BOOTSTRAP};
use crate::{Error, Result};

pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Contiguous blocks resampled by the bootstrap. Rows are independent, so
/// blocks are too.
pub const BOOTSTRAP_BLOCKS: usize = 1000;

const K: usize = 17;

/// Quantities whose means and covariances are tracked.
pub const TRACKED: [&str; K] = [
    "x_b1", "x_b2", "x_e1", "x_e2", "x_a1", "x_a2", "x_n", "x_n_twin", "x_bs", "s_1", "s_2", "s_i1", "s_i2",
    "cos_theta_1", "sin_theta_1", "cos_theta_2", "sin_theta_2",
];

const XB: [usize; 2] = [0, 1];
const XE: [usize; 2] = [2, 3];
const NTWIN: usize = 7;
const S: [usize; 2] = [9, 10];
const SI: [usize; 2] = [11, 12];
const COS: [usize; 2] = [13, 15];
const SIN: [usize; 2] = [14, 16];

fn extract(r: &Row) -> [f64; K] {
    let c = |c: Col| r[c as usize];
    let (s1, c1) = c(Col::Theta1).sin_cos();
    let (s2, c2) = c(Col::Theta2).sin_cos();
    [
        c(Col::XB1),
        c(Col::XB2),
        c(Col::X81),
        c(Col::X82),
        c(Col::A1X),
        c(Col::A2X),
        c(Col::NX),
        c(Col::NPX),
        c(Col::BSX),
        c(Col::S1),
        c(Col::S2),
        c(Col::SI1),
        c(Col::SI2),
        c1,
        s1,
        c2,
        s2,
    ]
}

/// Running count, means and co-moments, mergeable in any grouping.
#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    mean: [f64; K],
    m2: [[f64; K]; K],
}

impl Moments {
    fn empty() -> Self {
        Moments {
            n: 0.0,
            mean: [0.0; K],
            m2: [[0.0; K]; K],
        }
    }

    fn push(&mut self, x: &[f64; K]) {
        self.n += 1.0;
        let mut delta = [0.0; K];
        for i in 0..K {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / self.n;
        }
        for i in 0..K {
            for j in i..K {
                self.m2[i][j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let mut delta = [0.0; K];
        for i in 0..K {
            delta[i] = o.mean[i] - self.mean[i];
            self.mean[i] += delta[i] * o.n / n;
        }
        let w = self.n * o.n / n;
        for i in 0..K {
            for j in i..K {
                self.m2[i][j] += o.m2[i][j] + delta[i] * delta[j] * w;
            }
        }
        self.n = n;
    }

    fn cov(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.m2[i][j] / (self.n - 1.0)
    }
}

fn is_degenerate_var(var: f64, mean: f64) -> bool {
    !(var > 1e-12 * (1.0 + mean * mean))
}

/// Everything computed from one set of moments.
#[derive(Debug, Clone)]
struct Snapshot {
    mean: [f64; K],
    cov: [[f64; K]; K],
    /// Per user: residual variance of Bob's quadrature after regressing on
    /// the known displacements, and the plug-in mutual information.
    cond: [Option<f64>; 2],
    mi: [Option<f64>; 2],
}

impl Snapshot {
    fn from(m: &Moments) -> Self {
        let mut cov = [[0.0; K]; K];
        for (i, row) in cov.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                *c = m.cov(i, j);
            }
        }
        let mut cond = [None; 2];
        let mut mi = [None; 2];
        for u in 0..2 {
            let b = XB[u];
            let var_b = cov[b][b];
            if is_degenerate_var(var_b, m.mean[b]) {
                continue;
            }
            let mut regressors: Vec<usize> = Vec::new();
            for r in [S[u], SI[u]] {
                if !is_degenerate_var(cov[r][r], m.mean[r]) && !regressors.contains(&r) {
                    regressors.push(r);
                }
            }
            let k = regressors.len();
            let explained = if k == 0 {
                0.0
            } else {
                let sxx = DMatrix::from_fn(k, k, |i, j| cov[regressors[i]][regressors[j]]);
                let sxy = DVector::from_fn(k, |i, _| cov[regressors[i]][b]);
                match sxx.cholesky() {
                    Some(ch) => sxy.dot(&ch.solve(&sxy)),
                    None => continue,
                }
            };
            // Unbiased residual variance with k fitted slopes.
            let resid = (var_b - explained) * (m.n - 1.0) / (m.n - 1.0 - k as f64);
            if is_degenerate_var(resid, 0.0) {
                continue;
            }
            cond[u] = Some(resid);
            mi[u] = Some(0.5 * (var_b / resid).log2());
        }
        Snapshot {
            mean: m.mean,
            cov,
            cond,
            mi,
        }
    }
}

/// A point estimate with its bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

/// Per-user view of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserStats {
    /// `Var(X_B)`.
    pub v_b: Estimate,
    /// Residual variance of `X_B` given the known displacements; `None` when
    /// degenerate.
    pub v_b_given_a: Option<Estimate>,
    /// `½ log₂(V_B / V_B|A)`; `None` when degenerate.
    pub mutual_information: Option<Estimate>,
    /// `cov(X_8, X_B)`.
    pub xi: Estimate,
    /// `cov(X'_N, X_B)`.
    pub psi: Estimate,
    /// `⟨cos θ⟩` and `⟨sin θ⟩`.
    pub mean_cos_theta: Estimate,
    pub mean_sin_theta: Estimate,
}

/// Summary statistics of a [`SampleBatch`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalStats {
    pub model: Model,
    pub n: usize,
    pub seed: u64,
    /// Means of [`TRACKED`].
    pub means: Vec<Estimate>,
    /// Unbiased covariances of [`TRACKED`], row-major.
    pub covariance: Vec<Estimate>,
    pub user1: UserStats,
    pub user2: UserStats,
    /// Human-readable reasons why some statistics are undefined.
    pub degenerate: Vec<String>,
}

impl EmpiricalStats {
    pub fn user(&self, u: User) -> &UserStats {
        match u {
            User::One => &self.user1,
            User::Two => &self.user2,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate.is_empty()
    }

    fn index(name: &str) -> Option<usize> {
        TRACKED.iter().position(|n| *n == name)
    }

    pub fn mean(&self, name: &str) -> Option<Estimate> {
        Self::index(name).map(|i| self.means[i])
    }

    pub fn cov(&self, a: &str, b: &str) -> Option<Estimate> {
        Some(self.covariance[Self::index(a)? * K + Self::index(b)?])
    }

    /// `statistic,value,std_err` rows; undefined statistics are left out.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Numeric(format!("csv write failed: {e}"));
        w.write_record(["statistic", "value", "std_err"]).map_err(io)?;
        let mut row = |name: String, e: Estimate| w.write_record([name, e.value.to_string(), e.std_err.to_string()]);
        for (i, n) in TRACKED.iter().enumerate() {
            row(format!("mean_{n}"), self.means[i]).map_err(io)?;
        }
        for i in 0..K {
            for j in i..K {
                let name = if i == j {
                    format!("var_{}", TRACKED[i])
                } else {
                    format!("cov_{}_{}", TRACKED[i], TRACKED[j])
                };
                row(name, self.covariance[i * K + j]).map_err(io)?;
            }
        }
        for u in User::BOTH {
            let s = self.user(u);
            let k = u.number();
            row(format!("v_b{k}"), s.v_b).map_err(io)?;
            if let Some(e) = s.v_b_given_a {
                row(format!("v_b_given_a{k}"), e).map_err(io)?;
            }
            if let Some(e) = s.mutual_information {
                row(format!("i_ab{k}"), e).map_err(io)?;
            }
            row(format!("xi{k}"), s.xi).map_err(io)?;
            row(format!("psi{k}"), s.psi).map_err(io)?;
            row(format!("mean_cos_theta{k}"), s.mean_cos_theta).map_err(io)?;
            row(format!("mean_sin_theta{k}"), s.mean_sin_theta).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Numeric(format!("csv write failed: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)
            .map_err(|e| Error::Numeric(format!("cannot create {}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn std_dev(vals: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = vals.collect();
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Means, covariances, conditional variances and plug-in mutual information
/// of a batch, with block-bootstrap standard errors.
///
/// Bob's conditional variance is the residual variance of `X_B` after a
/// linear regression on the displacements known to the legitimate side: the
/// user's own and, for the interference, its known part. Regressors with
/// zero variance are dropped. Undefined quantities are reported through
/// [`EmpiricalStats::degenerate`] rather than as errors.
pub fn empirical_stats(batch: &SampleBatch) -> Result<EmpiricalStats> {
    let n = batch.len();
    if n < MIN_SAMPLES {
        return Err(Error::param("samples", format!("needs at least {MIN_SAMPLES}, got {n}")));
    }
    let rows = batch.rows();
    let blocks: Vec<Moments> = (0..BOOTSTRAP_BLOCKS)
        .into_par_iter()
        .map(|b| {
            let mut m = Moments::empty();
            for r in &rows[b * n / BOOTSTRAP_BLOCKS..(b + 1) * n / BOOTSTRAP_BLOCKS] {
                m.push(&extract(r));
            }
            m
        })
        .collect();
    let total = blocks.iter().fold(Moments::empty(), |mut acc, b| {
        acc.merge(b);
        acc
    });
    let full = Snapshot::from(&total);

    let boot: Vec<Snapshot> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(batch.seed, DOMAIN_BOOTSTRAP, r as u64);
            let mut m = Moments::empty();
            for _ in 0..BOOTSTRAP_BLOCKS {
                m.merge(&blocks[rng.random_range(0..BOOTSTRAP_BLOCKS)]);
            }
            Snapshot::from(&m)
        })
        .collect();

    let est = |value: f64, f: &dyn Fn(&Snapshot) -> f64| Estimate {
        value,
        std_err: std_dev(boot.iter().map(f)),
    };
    let opt = |value: Option<f64>, f: &dyn Fn(&Snapshot) -> Option<f64>| {
        value.map(|v| Estimate {
            value: v,
            std_err: std_dev(boot.iter().filter_map(f)),
        })
    };

    let means = (0..K).map(|i| est(full.mean[i], &|s| s.mean[i])).collect();
    let covariance = (0..K * K)
        .map(|ij| {
            let (i, j) = (ij / K, ij % K);
            est(full.cov[i][j], &|s| s.cov[i][j])
        })
        .collect();

    let mut degenerate = Vec::new();
    let users: Vec<UserStats> = (0..2)
        .map(|u| {
            let b = XB[u];
            if full.cond[u].is_none() {
                let what = if is_degenerate_var(full.cov[b][b], full.mean[b]) {
                    "has zero variance"
                } else {
                    "is fully explained by the displacements"
                };
                degenerate.push(format!("{} {what}; mutual information undefined", TRACKED[b]));
            }
            UserStats {
                v_b: est(full.cov[b][b], &|s| s.cov[b][b]),
                v_b_given_a: opt(full.cond[u], &|s| s.cond[u]),
                mutual_information: opt(full.mi[u], &|s| s.mi[u]),
                xi: est(full.cov[XE[u]][b], &|s| s.cov[XE[u]][b]),
                psi: est(full.cov[NTWIN][b], &|s| s.cov[NTWIN][b]),
                mean_cos_theta: est(full.mean[COS[u]], &|s| s.mean[COS[u]]),
                mean_sin_theta: est(full.mean[SIN[u]], &|s| s.mean[SIN[u]]),
            }
        })
        .collect();

    Ok(EmpiricalStats {
        model: batch.model,
        n,
        seed: batch.seed,
        means,
        covariance,
        user1: users[0],
        user2: users[1],
        degenerate,
    })
}

/// One analytic value against its empirical estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub quantity: String,
    pub analytic: f64,
    pub empirical: f64,
    pub std_err: f64,
    /// `(empirical − analytic)/std_err`.
    pub z_score: f64,
}

impl Comparison {
    fn new(quantity: String, analytic: f64, e: Estimate) -> Self {
        let diff = e.value - analytic;
        let z_score = if e.std_err > 0.0 {
            diff / e.std_err
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        Comparison {
            quantity,
            analytic,
            empirical: e.value,
            std_err: e.std_err,
            z_score,
        }
    }
}

/// Lines the batch statistics up against the analytic formulas: Bob's
/// variances and mutual information, both conventions for `ξ` and `ψ`, and
/// for the explicit-phase model `⟨cos θ⟩` against `√M`.
pub fn compare_with_analytic(p: &QcdmaParams, stats: &EmpiricalStats) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for u in User::BOTH {
        let s = stats.user(u);
        let k = u.number();
        out.push(Comparison::new(format!("v_b{k}"), network::bob_variance(p, u), s.v_b));
        if let Some(e) = s.v_b_given_a {
            out.push(Comparison::new(format!("v_b_given_a{k}"), network::conditional_variance(p, u), e));
        }
        if let Some(e) = s.mutual_information {
            out.push(Comparison::new(format!("i_ab{k}"), network::mutual_information(p, u)?, e));
        }
        for (mode, tag) in [(CrossMode::Derived, "derived"), (CrossMode::PaperLiteral, "literal")] {
            out.push(Comparison::new(format!("xi{k}_{tag}"), network::xi_for(p, u, mode), s.xi));
        }
        for (mode, tag) in [(CrossMode::Derived, "derived"), (CrossMode::PaperLiteral, "literal")] {
            out.push(Comparison::new(format!("psi{k}_{tag}"), network::psi_for(p, u, mode), s.psi));
        }
        if stats.model == Model::ExplicitPhase {
            let amp = CorrectionFactor::new(p.m(u))?.amplitude();
            out.push(Comparison::new(format!("mean_cos_theta{k}"), amp, s.mean_cos_theta));
        }
    }
    Ok(out)
}

/// `quantity,analytic,empirical,std_err,z_score` rows.
pub fn write_comparison_csv<W: Write>(rows: &[Comparison], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Numeric(format!("csv write failed: {e}"));
    w.write_record(["quantity", "analytic", "empirical", "std_err", "z_score"]).map_err(io)?;
    for r in rows {
        w.write_record([
            r.quantity.clone(),
            r.analytic.to_string(),
            r.empirical.to_string(),
            r.std_err.to_string(),
            r.z_score.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Numeric(format!("csv write failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::sample::{simulate_averaged, NCOL};
    use crate::network::{ChannelParams, UserParams};

    #[test]
    fn merge_matches_single_pass() {
        let rows: Vec<[f64; K]> = (0..500)
            .map(|i| {
                let t = i as f64;
                let mut x = [0.0; K];
                for (k, v) in x.iter_mut().enumerate() {
                    *v = (t * 0.37 + k as f64).sin() * (k + 1) as f64 + 3.0;
                }
                x
            })
            .collect();
        let mut one = Moments::empty();
        rows.iter().for_each(|r| one.push(r));
        let mut a = Moments::empty();
        let mut b = Moments::empty();
        rows[..123].iter().for_each(|r| a.push(r));
        rows[123..].iter().for_each(|r| b.push(r));
        a.merge(&b);
        for i in 0..K {
            assert!((a.mean[i] - one.mean[i]).abs() < 1e-12);
            for j in i..K {
                assert!((a.cov(i, j) - one.cov(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_batch_is_degenerate() {
        let batch = SampleBatch::from_rows(Model::Averaged, 1, vec![[2.5; NCOL]; MIN_SAMPLES]);
        let s = empirical_stats(&batch).unwrap();
        assert_eq!(s.user1.v_b.value, 0.0);
        assert!(s.user1.mutual_information.is_none());
        assert!(s.is_degenerate());
        assert_eq!(s.degenerate.len(), 2);
    }

    #[test]
    fn independent_variables_show_no_information() {
        // η = 0: Bob sees nothing of either Alice.
        let p = QcdmaParams::symmetric(
            UserParams::new(50.0, 1.0).unwrap(),
            ChannelParams::with_eta(0.0, 1.5, 1.0).unwrap(),
            CorrectionFactor::new(0.3).unwrap(),
        );
        let s = empirical_stats(&simulate_averaged(&p, 100_000, 5).unwrap()).unwrap();
        for u in User::BOTH {
            let mi = s.user(u).mutual_information.unwrap();
            assert!(mi.value.abs() < 3.0 * mi.std_err, "{mi:?}");
        }
    }

    #[test]
    fn csv_export() {
        let p = QcdmaParams::symmetric(
            UserParams::new(5.0, 1.0).unwrap(),
            ChannelParams::with_eta(0.5, 1.0, 1.0).unwrap(),
            CorrectionFactor::new(0.5).unwrap(),
        );
        let s = empirical_stats(&simulate_averaged(&p, MIN_SAMPLES, 2).unwrap()).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("statistic,value,std_err\n"));
        assert!(text.contains("\ni_ab1,"));
        assert_eq!(text.lines().count(), 1 + K + K * (K + 1) / 2 + 2 * 7);
        assert_eq!(s.cov("x_b1", "x_n_twin"), Some(s.user1.psi));
    }
}
