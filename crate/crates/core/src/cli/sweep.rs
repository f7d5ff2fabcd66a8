use std::io::{self, Write};

use clap::ValueEnum;
use rayon::prelude::*;

use super::config::{ChaosSource, RunConfig};
use crate::network::{secret_key_rate, UserParams};
use crate::Result;

/// Largest grid a sweep accepts.
const MAX_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepVar {
    /// Distance in km.
    D,
    /// Correction factor of both users.
    M,
    /// Modulation variance of both users.
    #[value(name = "v_s")]
    VS,
}

/// `min, min+step, …` up to `max` (inclusive, with a 1e-9 step slack).
pub fn grid(min: f64, max: f64, step: f64) -> std::result::Result<Vec<f64>, String> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) {
        return Err("grid bounds and step must be finite".into());
    }
    if !(step > 0.0) {
        return Err(format!("step must be positive, got {step}"));
    }
    if min > max {
        return Err(format!("min {min} exceeds max {max}"));
    }
    let count = ((max - min) / step + 1e-9).floor() + 1.0;
    if count > MAX_POINTS as f64 {
        return Err(format!("grid has {count} points, more than {MAX_POINTS}"));
    }
    Ok((0..count as usize).map(|i| min + i as f64 * step).collect())
}

pub const SWEEP_HEADER: [&str; 16] = [
    "d_km",
    "eta",
    "m1",
    "m2",
    "v_s1",
    "v_s2",
    "r1",
    "r2",
    "r_total",
    "r_baseline",
    "i_ab1",
    "chi1",
    "i_ab2",
    "chi2",
    "sub_vacuum",
    "degenerate",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub d_km: f64,
    pub eta: f64,
    pub m1: f64,
    pub m2: f64,
    pub v_s1: f64,
    pub v_s2: f64,
    pub r1: f64,
    pub r2: f64,
    pub r_total: f64,
    pub r_baseline: f64,
    pub i_ab1: f64,
    pub chi1: f64,
    pub i_ab2: f64,
    pub chi2: f64,
    pub sub_vacuum: bool,
    /// The point failed to evaluate; rates are written as 0.
    pub degenerate: bool,
}

fn with_value(cfg: &RunConfig, var: SweepVar, v: f64) -> Result<RunConfig> {
    let mut c = cfg.clone();
    match var {
        SweepVar::D => {}
        SweepVar::M => c.chaos = [ChaosSource::Factor(v), ChaosSource::Factor(v)],
        SweepVar::VS => {
            c.user1 = UserParams::new(v, c.user1.v_0)?;
            c.user2 = UserParams::new(v, c.user2.v_0)?;
        }
    }
    Ok(c)
}

/// Evaluates every grid point. For `d` the values are distances; otherwise
/// each value is one curve over `distances`. Rows come out in grid order.
///
/// Invalid grid values are an error; points whose evaluation fails become
/// zero rows flagged `degenerate`.
pub fn run_sweep(cfg: &RunConfig, var: SweepVar, values: &[f64], distances: &[f64]) -> Result<Vec<SweepRow>> {
    let mut points = Vec::new();
    match var {
        SweepVar::D => {
            for &d in values {
                points.push((cfg.clone(), d));
            }
        }
        _ => {
            for &v in values {
                let c = with_value(cfg, var, v)?;
                for &d in distances {
                    points.push((c.clone(), d));
                }
            }
        }
    }
    let mut params = Vec::with_capacity(points.len());
    for (c, d) in &points {
        let mut p = c.params()?;
        p.channel = c.channel_at(*d)?;
        params.push((p, *d));
    }
    Ok(params
        .par_iter()
        .map(|(p, d)| {
            let base = SweepRow {
                d_km: *d,
                eta: p.channel.eta,
                m1: p.m1.value(),
                m2: p.m2.value(),
                v_s1: p.user1.v_s,
                v_s2: p.user2.v_s,
                r1: 0.0,
                r2: 0.0,
                r_total: 0.0,
                r_baseline: 0.0,
                i_ab1: 0.0,
                chi1: 0.0,
                i_ab2: 0.0,
                chi2: 0.0,
                sub_vacuum: false,
                degenerate: true,
            };
            match secret_key_rate(p) {
                Ok(b) => SweepRow {
                    r1: b.user1.r,
                    r2: b.user2.r,
                    r_total: b.r_total,
                    r_baseline: b.r_baseline,
                    i_ab1: b.user1.i_ab,
                    chi1: b.user1.chi,
                    i_ab2: b.user2.i_ab,
                    chi2: b.user2.chi,
                    sub_vacuum: b.user1.sub_vacuum || b.user2.sub_vacuum,
                    degenerate: false,
                    ..base
                },
                Err(_) => base,
            }
        })
        .collect())
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: &mut W) -> io::Result<()> {
    writeln!(out, "{}", SWEEP_HEADER.join(","))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.d_km,
            r.eta,
            r.m1,
            r.m2,
            r.v_s1,
            r.v_s2,
            r.r1,
            r.r2,
            r.r_total,
            r.r_baseline,
            r.i_ab1,
            r.chi1,
            r.i_ab2,
            r.chi2,
            r.sub_vacuum as u8,
            r.degenerate as u8
        )?;
    }
    Ok(())
}
