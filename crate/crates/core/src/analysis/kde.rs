use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Density floor inside the cross-validated log-likelihood, so held-out
/// points outside every kernel's support cost a large finite penalty.
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    /// `K(u) = ½·1[|u| ≤ 1]`
    TopHat,
    /// `K(u) = ½·e^{−|u|}`
    Exponential,
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top-hat" | "tophat" => Ok(Kernel::TopHat),
            "exponential" => Ok(Kernel::Exponential),
            other => Err(Error::invalid(format!(
                "unknown kernel `{other}` (expected top-hat or exponential)"
            ))),
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kernel::TopHat => "top-hat",
            Kernel::Exponential => "exponential",
        })
    }
}

/// `Σᵢ K((q − xᵢ)/h)` for every query, with `sorted` in ascending order.
fn kernel_sums(sorted: &[f64], queries: &[f64], kernel: Kernel, h: f64) -> Vec<f64> {
    match kernel {
        Kernel::TopHat => queries
            .iter()
            .map(|&q| {
                let lo = sorted.partition_point(|&x| x < q - h);
                let hi = sorted.partition_point(|&x| x <= q + h);
                0.5 * (hi - lo) as f64
            })
            .collect(),
        Kernel::Exponential => {
            // Sweep the queries in order, carrying Σ e^{−|q − x|/h} for the
            // points on each side; every factor is at most one.
            let mut order: Vec<usize> = (0..queries.len()).collect();
            order.sort_by(|&a, &b| queries[a].total_cmp(&queries[b]));
            let mut out = vec![0.0; queries.len()];

            let (mut acc, mut i, mut last) = (0.0, 0, f64::NEG_INFINITY);
            for &k in &order {
                let q = queries[k];
                if last.is_finite() {
                    acc *= (-(q - last) / h).exp();
                }
                while i < sorted.len() && sorted[i] <= q {
                    acc += (-(q - sorted[i]) / h).exp();
                    i += 1;
                }
                out[k] += acc;
                last = q;
            }

            let (mut acc, mut i, mut last) = (0.0, sorted.len(), f64::INFINITY);
            for &k in order.iter().rev() {
                let q = queries[k];
                if last.is_finite() {
                    acc *= (-(last - q) / h).exp();
                }
                while i > 0 && sorted[i - 1] > q {
                    acc += (-(sorted[i - 1] - q) / h).exp();
                    i -= 1;
                }
                out[k] += acc;
                last = q;
            }
            out.iter_mut().for_each(|v| *v *= 0.5);
            out
        }
    }
}

/// `ρ̂(x) = (1/(n·h))·Σᵢ K((x − xᵢ)/h)` on `grid`.
pub fn kde_estimate(sample: &[f64], kernel: Kernel, bandwidth: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if sample.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let norm = 1.0 / (sample.len() as f64 * bandwidth);
    Ok(kernel_sums(&sorted, grid, kernel, bandwidth)
        .into_iter()
        .map(|v| v * norm)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSearch {
    pub kernel: Kernel,
    pub bandwidth: f64,
    /// Cross-validated log-likelihood of the chosen bandwidth.
    pub log_likelihood: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub n_candidates: usize,
    pub folds: usize,
    pub seed: u64,
}

/// Picks the bandwidth on a log-spaced grid of `n_candidates` values in
/// `[h_min, h_max]` that maximizes the `folds`-fold cross-validated
/// log-likelihood. Fold membership is a seeded shuffle.
pub fn kde_bandwidth_search(
    sample: &[f64],
    kernel: Kernel,
    (h_min, h_max): (f64, f64),
    n_candidates: usize,
    folds: usize,
    seed: u64,
) -> Result<BandwidthSearch> {
    if !(h_min > 0.0 && h_max >= h_min && h_max.is_finite()) {
        return Err(Error::invalid(format!("bad bandwidth range [{h_min}, {h_max}]")));
    }
    if n_candidates == 0 {
        return Err(Error::invalid("need at least one candidate bandwidth"));
    }
    if folds < 2 || sample.len() < folds {
        return Err(Error::invalid(format!(
            "need at least 2 folds and one point per fold, got {folds} folds for {} points",
            sample.len()
        )));
    }
    let mut idx: Vec<usize> = (0..sample.len()).collect();
    idx.shuffle(&mut seeded(seed));
    let splits: Vec<(Vec<f64>, Vec<f64>)> = (0..folds)
        .map(|f| {
            let mut train = Vec::with_capacity(sample.len());
            let mut test = Vec::with_capacity(sample.len() / folds + 1);
            for (pos, &i) in idx.iter().enumerate() {
                if pos % folds == f {
                    test.push(sample[i]);
                } else {
                    train.push(sample[i]);
                }
            }
            train.sort_by(f64::total_cmp);
            (train, test)
        })
        .collect();

    let candidates: Vec<f64> = if n_candidates == 1 {
        vec![h_min]
    } else {
        let (a, b) = (h_min.ln(), h_max.ln());
        (0..n_candidates)
            .map(|k| (a + (b - a) * k as f64 / (n_candidates - 1) as f64).exp())
            .collect()
    };
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|&h| {
            splits
                .iter()
                .map(|(train, test)| {
                    let norm = 1.0 / (train.len() as f64 * h);
                    kernel_sums(train, test, kernel, h)
                        .into_iter()
                        .map(|s| (s * norm).max(LOG_FLOOR).ln())
                        .sum::<f64>()
                })
                .sum()
        })
        .collect();
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    Ok(BandwidthSearch {
        kernel,
        bandwidth: candidates[best],
        log_likelihood: scores[best],
        h_min,
        h_max,
        n_candidates,
        folds,
        seed,
    })
}
