//! Black-box minimization. [`Cmaes`] is a (μ/μ_w, λ) covariance matrix
//! adaptation evolution strategy with rank-one and rank-μ updates and
//! cumulative step-size control.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Why a minimization run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// The best value reached the target.
    Target,
    /// The generation budget ran out.
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
    pub stop: StopReason,
    /// `(generation, best value)` each time the best-ever value improved.
    pub trace: Vec<(usize, f64)>,
}

/// Interface for pluggable minimizers. `f` must be pure: it may be called
/// from several threads, in any order.
pub trait Minimizer {
    fn minimize<F>(&self, f: F, x0: &[f64]) -> Result<Minimum>
    where
        F: Fn(&[f64]) -> f64 + Sync;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaesConfig {
    /// Offspring per generation; `None` selects `4 + ⌊3 ln d⌋`.
    pub population: Option<usize>,
    pub sigma0: f64,
    pub max_iters: usize,
    /// Stop once the best value is at or below this.
    pub target: f64,
    pub seed: u64,
    /// Restart from the incumbent when the search distribution has collapsed
    /// to this scale (relative to `sigma0`).
    pub tol_x: f64,
}

impl Default for CmaesConfig {
    fn default() -> Self {
        Self {
            population: None,
            sigma0: 0.3,
            max_iters: 10_000,
            target: f64::NEG_INFINITY,
            seed: 0,
            tol_x: 1e-12,
        }
    }
}

pub fn default_population(dim: usize) -> usize {
    4 + (3.0 * (dim as f64).ln()).floor() as usize
}

#[derive(Debug, Clone, Default)]
pub struct Cmaes {
    pub config: CmaesConfig,
}

impl Cmaes {
    pub fn new(config: CmaesConfig) -> Self {
        Self { config }
    }
}

/// Strategy constants that depend only on dimension and population.
struct Params {
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    cc: f64,
    cs: f64,
    c1: f64,
    cmu: f64,
    damps: f64,
    chi_n: f64,
}

impl Params {
    fn new(n: usize, lambda: usize) -> Self {
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let cc = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let cs = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let cmu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let damps = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Self {
            lambda,
            mu,
            weights,
            mu_eff,
            cc,
            cs,
            c1,
            cmu,
            damps,
            chi_n,
        }
    }
}

/// Mutable search distribution.
struct State {
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    pc: DVector<f64>,
    ps: DVector<f64>,
    b: DMatrix<f64>,
    d: DVector<f64>,
    generation: usize,
}

impl State {
    fn new(x0: &[f64], sigma: f64) -> Self {
        let n = x0.len();
        Self {
            mean: DVector::from_column_slice(x0),
            sigma,
            cov: DMatrix::identity(n, n),
            pc: DVector::zeros(n),
            ps: DVector::zeros(n),
            b: DMatrix::identity(n, n),
            d: DVector::from_element(n, 1.0),
            generation: 0,
        }
    }

    fn decompose(&mut self) {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        self.b = eig.eigenvectors;
        self.d = eig.eigenvalues.map(|v| v.max(1e-300).sqrt());
        self.cov = &self.b * DMatrix::from_diagonal(&self.d.map(|v| v * v)) * self.b.transpose();
    }

    fn max_axis(&self) -> f64 {
        self.sigma * self.d.max()
    }

    fn condition(&self) -> f64 {
        (self.d.max() / self.d.min()).powi(2)
    }
}

impl Minimizer for Cmaes {
    fn minimize<F>(&self, f: F, x0: &[f64]) -> Result<Minimum>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let cfg = &self.config;
        let n = x0.len();
        if n == 0 {
            return Err(Error::invalid("cannot minimize over zero dimensions"));
        }
        if !(cfg.sigma0 > 0.0) || !cfg.sigma0.is_finite() {
            return Err(Error::invalid(format!("σ₀ must be positive, got {}", cfg.sigma0)));
        }
        let lambda = cfg.population.unwrap_or_else(|| default_population(n));
        if lambda < 2 {
            return Err(Error::invalid("population must be at least 2"));
        }
        let p = Params::new(n, lambda);
        let mut rng = seeded(cfg.seed);

        let f0 = f(x0);
        if !f0.is_finite() {
            return Err(Error::NonFiniteLoss {
                generation: 0,
                candidate: x0.to_vec(),
            });
        }
        let mut best_x = x0.to_vec();
        let mut best_f = f0;
        let mut trace = vec![(0, f0)];
        let mut evaluations = 1;
        let mut restarts = 0;
        let mut state = State::new(x0, cfg.sigma0);
        let mut iterations = 0;

        while best_f > cfg.target && iterations < cfg.max_iters {
            iterations += 1;
            state.generation += 1;
            state.decompose();

            let zs: Vec<DVector<f64>> = (0..p.lambda)
                .map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
                .collect();
            let ys: Vec<DVector<f64>> = zs
                .iter()
                .map(|z| &state.b * z.component_mul(&state.d))
                .collect();
            let xs: Vec<DVector<f64>> = ys.iter().map(|y| &state.mean + y * state.sigma).collect();
            let fs: Vec<f64> = xs.par_iter().map(|x| f(x.as_slice())).collect();
            evaluations += p.lambda;

            if let Some(k) = fs.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    generation: iterations,
                    candidate: xs[k].as_slice().to_vec(),
                });
            }

            let mut order: Vec<usize> = (0..p.lambda).collect();
            order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]).then(a.cmp(&b)));
            if fs[order[0]] < best_f {
                best_f = fs[order[0]];
                best_x = xs[order[0]].as_slice().to_vec();
                trace.push((iterations, best_f));
            }

            let mut y_w = DVector::zeros(n);
            for (w, &k) in p.weights.iter().zip(&order[..p.mu]) {
                y_w += &ys[k] * *w;
            }
            state.mean += &y_w * state.sigma;

            // C^{-1/2}·y_w = B·D⁻¹·Bᵀ·y_w
            let inv_sqrt_y = &state.b * (state.b.transpose() * &y_w).component_div(&state.d);
            state.ps = &state.ps * (1.0 - p.cs) + inv_sqrt_y * (p.cs * (2.0 - p.cs) * p.mu_eff).sqrt();
            let ps_norm = state.ps.norm();
            let h_sig = ps_norm / (1.0 - (1.0 - p.cs).powi(2 * state.generation as i32)).sqrt() / p.chi_n
                < 1.4 + 2.0 / (n as f64 + 1.0);
            let h = if h_sig { 1.0 } else { 0.0 };
            state.pc = &state.pc * (1.0 - p.cc) + &y_w * (h * (p.cc * (2.0 - p.cc) * p.mu_eff).sqrt());

            let mut rank_mu = DMatrix::zeros(n, n);
            for (w, &k) in p.weights.iter().zip(&order[..p.mu]) {
                rank_mu += &ys[k] * ys[k].transpose() * *w;
            }
            let rank_one = &state.pc * state.pc.transpose()
                + &state.cov * ((1.0 - h) * p.cc * (2.0 - p.cc));
            state.cov = &state.cov * (1.0 - p.c1 - p.cmu) + rank_one * p.c1 + rank_mu * p.cmu;
            state.sigma *= ((p.cs / p.damps) * (ps_norm / p.chi_n - 1.0)).exp();

            let collapsed = state.max_axis() < cfg.tol_x * cfg.sigma0;
            let degenerate = !state.sigma.is_finite() || state.condition() > 1e14;
            if (collapsed || degenerate) && best_f > cfg.target {
                restarts += 1;
                state = State::new(&best_x, cfg.sigma0);
            }
        }

        Ok(Minimum {
            x: best_x,
            f: best_f,
            iterations,
            evaluations,
            restarts,
            stop: if best_f <= cfg.target {
                StopReason::Target
            } else {
                StopReason::MaxIters
            },
            trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 1.0).powi(2)).sum()
    }

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    #[test]
    fn default_population_matches_formula() {
        assert_eq!(default_population(1), 4);
        assert_eq!(default_population(10), 10);
        assert_eq!(default_population(25), 13);
    }

    #[test]
    fn solves_sphere_to_target() {
        let cma = Cmaes::new(CmaesConfig {
            target: 1e-12,
            seed: 3,
            ..Default::default()
        });
        let m = cma.minimize(sphere, &[0.0; 8]).unwrap();
        assert_eq!(m.stop, StopReason::Target);
        assert!(m.f <= 1e-12);
        assert!(m.x.iter().all(|v| (v - 1.0).abs() < 1e-5));
    }

    #[test]
    fn solves_rosenbrock() {
        let cma = Cmaes::new(CmaesConfig {
            target: 1e-10,
            seed: 11,
            ..Default::default()
        });
        let m = cma.minimize(rosenbrock, &[-1.0, 0.5, 0.0, 0.3]).unwrap();
        assert!(m.f <= 1e-10, "{m:?}");
    }

    #[test]
    fn respects_iteration_budget() {
        let cma = Cmaes::new(CmaesConfig {
            max_iters: 5,
            target: 0.0,
            ..Default::default()
        });
        let m = cma.minimize(rosenbrock, &[-1.0, 2.0]).unwrap();
        assert_eq!(m.iterations, 5);
        assert_eq!(m.stop, StopReason::MaxIters);
        assert_eq!(m.evaluations, 1 + 5 * default_population(2));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cma = Cmaes::new(CmaesConfig {
            max_iters: 200,
            seed: 9,
            ..Default::default()
        });
        let a = cma.minimize(rosenbrock, &[0.0; 5]).unwrap();
        let b = cma.minimize(rosenbrock, &[0.0; 5]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn best_ever_is_monotone_in_trace() {
        let cma = Cmaes::new(CmaesConfig {
            max_iters: 300,
            seed: 1,
            ..Default::default()
        });
        let m = cma.minimize(rosenbrock, &[0.0; 6]).unwrap();
        assert!(m.trace.windows(2).all(|w| w[1].1 < w[0].1 && w[1].0 > w[0].0));
        assert_eq!(m.trace.last().unwrap().1, m.f);
        assert_eq!(rosenbrock(&m.x), m.f);
    }

    #[test]
    fn non_finite_objective_aborts() {
        let cma = Cmaes::new(CmaesConfig {
            seed: 2,
            ..Default::default()
        });
        let err = cma
            .minimize(|x| if x[0] > 0.1 { f64::NAN } else { x[0] * x[0] }, &[0.0, 0.0])
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }));
    }

    #[test]
    fn rejects_bad_config() {
        let bad = Cmaes::new(CmaesConfig {
            sigma0: 0.0,
            ..Default::default()
        });
        assert!(bad.minimize(sphere, &[0.0]).is_err());
        assert!(Cmaes::default().minimize(sphere, &[]).is_err());
    }
}
