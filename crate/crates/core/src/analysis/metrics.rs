use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Histogram bin count for file-ingested samples without an analytic density.
pub const HEP_BINS: usize = 34;

/// Clip floor applied before the KL divergence.
const KL_FLOOR: f64 = 1e-12;

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("metrics need at least one point"));
    }
    Ok(())
}

/// `(1/N)·Σⱼ (targetⱼ − predⱼ)²`.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target)?;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (t - p).powi(2))
        .sum::<f64>()
        / pred.len() as f64)
}

/// `Σᵢ pᵢ·ln(pᵢ/qᵢ)` after clipping both vectors at `10⁻¹²` and normalizing
/// each to unit sum.
pub fn kl_divergence(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target)?;
    let clip = |v: &[f64]| {
        let c: Vec<f64> = v.iter().map(|x| x.max(KL_FLOOR)).collect();
        let total: f64 = c.iter().sum();
        c.into_iter().map(|x| x / total).collect::<Vec<_>>()
    };
    let (p, q) = (clip(pred), clip(target));
    Ok(p.iter().zip(&q).map(|(p, q)| p * (p / q).ln()).sum::<f64>().max(0.0))
}

/// `n` equispaced points on `[start, end]`, ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(start: f64, end: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid needs at least one point"));
        }
        if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) || end < start {
            return Err(Error::invalid(format!(
                "grid must satisfy 0 ≤ start ≤ end ≤ 1, got [{start}, {end}]"
            )));
        }
        if n == 1 && start != end {
            return Err(Error::invalid("a one-point grid needs start = end"));
        }
        Ok(Self { start, end, n })
    }

    /// `n` points covering `[0, 1]`.
    pub fn unit(n: usize) -> Result<Self> {
        if n == 1 {
            return Self::new(0.0, 0.0, 1);
        }
        Self::new(0.0, 1.0, n)
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.n - 1) as f64;
        (0..self.n)
            .map(|k| {
                if k + 1 == self.n {
                    self.end
                } else {
                    self.start + step * k as f64
                }
            })
            .collect()
    }
}

impl std::fmt::Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.end, self.n)
    }
}

/// `N` (that many points on `[0, 1]`) or `START:END:N`.
impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("cannot parse grid `{s}` (expected N or START:END:N)"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [n] => Grid::unit(n.trim().parse().map_err(|_| bad())?),
            [a, b, n] => Grid::new(
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
                n.trim().parse().map_err(|_| bad())?,
            ),
            _ => Err(bad()),
        }
    }
}

/// Error metrics of a model curve against the truth, in normalized units
/// (`t ∈ [0, 1]`, densities per unit `t`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse_cdf: Option<f64>,
    pub mse_pdf: Option<f64>,
    pub kl_pdf: Option<f64>,
    pub n_points: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub mode: String,
}

/// Density histogram with `bins` equal bins on `[lo, hi]`; returns bin
/// centers and `count/(n·width)`, where `n` counts the points in range.
pub fn histogram_density(sample: &[f64], bins: usize, lo: f64, hi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::invalid(format!("bad histogram: {bins} bins on [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut n = 0usize;
    for &x in sample {
        if x < lo || x > hi {
            continue;
        }
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
        n += 1;
    }
    if n == 0 {
        return Err(Error::invalid("no sample points inside the histogram range"));
    }
    let centers = (0..bins).map(|k| lo + width * (k as f64 + 0.5)).collect();
    let dens = counts
        .iter()
        .map(|&c| c as f64 / (n as f64 * width))
        .collect();
    Ok((centers, dens))
}
