//! Run configuration: a flat TOML file whose keys mirror the command-line
//! flags. Flags take precedence over the file, the file over defaults.
//!
//! ```toml
//! seed = 1
//! dist = "gamma:10:0.5"
//! n_sample = 50000
//! dtau = 0.002
//! total_time = 50.0
//! degree = 25
//! basis = "bernstein"
//! stepper = "exact-step"
//! ntrain = 100
//! j_thresh = 1e-5
//! max_iters = 10000
//! sigma0 = 0.3
//! # population = 13
//! mode = "exact"
//! shots = 200000
//! repeats = 20
//! grid = "500"
//! kernel = "exponential"
//! bandwidth_min = 1e-5
//! bandwidth_max = 1.0
//! bandwidth_candidates = 1000
//! folds = 5
//! ```

use std::path::Path;

use adiabatic_pdf::analysis::{DistSpec, Grid, Kernel};
use adiabatic_pdf::circuit::Mode;
use adiabatic_pdf::evolution::Stepper;
use adiabatic_pdf::schedule::Basis;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub dist: Option<String>,
    pub n_sample: Option<usize>,
    pub dtau: Option<f64>,
    pub total_time: Option<f64>,
    pub degree: Option<usize>,
    pub basis: Option<String>,
    pub stepper: Option<String>,
    pub ntrain: Option<usize>,
    pub j_thresh: Option<f64>,
    pub max_iters: Option<usize>,
    pub sigma0: Option<f64>,
    pub population: Option<usize>,
    pub mode: Option<String>,
    pub shots: Option<u64>,
    pub repeats: Option<usize>,
    pub grid: Option<String>,
    pub kernel: Option<String>,
    pub bandwidth_min: Option<f64>,
    pub bandwidth_max: Option<f64>,
    pub bandwidth_candidates: Option<usize>,
    pub folds: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Fills every unset key of `self` from `other`.
    pub fn or(self, other: RunConfig) -> RunConfig {
        RunConfig {
            seed: self.seed.or(other.seed),
            dist: self.dist.or(other.dist),
            n_sample: self.n_sample.or(other.n_sample),
            dtau: self.dtau.or(other.dtau),
            total_time: self.total_time.or(other.total_time),
            degree: self.degree.or(other.degree),
            basis: self.basis.or(other.basis),
            stepper: self.stepper.or(other.stepper),
            ntrain: self.ntrain.or(other.ntrain),
            j_thresh: self.j_thresh.or(other.j_thresh),
            max_iters: self.max_iters.or(other.max_iters),
            sigma0: self.sigma0.or(other.sigma0),
            population: self.population.or(other.population),
            mode: self.mode.or(other.mode),
            shots: self.shots.or(other.shots),
            repeats: self.repeats.or(other.repeats),
            grid: self.grid.or(other.grid),
            kernel: self.kernel.or(other.kernel),
            bandwidth_min: self.bandwidth_min.or(other.bandwidth_min),
            bandwidth_max: self.bandwidth_max.or(other.bandwidth_max),
            bandwidth_candidates: self.bandwidth_candidates.or(other.bandwidth_candidates),
            folds: self.folds.or(other.folds),
        }
    }
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub dist: DistSpec,
    pub n_sample: usize,
    pub dtau: f64,
    pub total_time: f64,
    pub degree: usize,
    pub basis: Basis,
    pub stepper: Stepper,
    pub ntrain: usize,
    pub j_thresh: f64,
    pub max_iters: usize,
    pub sigma0: f64,
    pub population: Option<usize>,
    pub mode: Mode,
    pub grid: Grid,
    pub kernel: Kernel,
    pub bandwidth_range: (f64, f64),
    pub bandwidth_candidates: usize,
    pub folds: usize,
}

fn parse<T: std::str::FromStr>(key: &str, value: Option<String>, default: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    let text = value.unwrap_or_else(|| default.to_string());
    text.parse()
        .map_err(|e| CliError::Usage(format!("{key}: {e}")))
}

impl Settings {
    pub fn resolve(cfg: RunConfig) -> Result<Self, CliError> {
        let shots = cfg.shots.unwrap_or(200_000);
        let repeats = cfg.repeats.unwrap_or(20);
        let mode = match cfg.mode.as_deref().unwrap_or("exact") {
            "exact" => Mode::Exact,
            "shots" => {
                if shots == 0 || repeats == 0 {
                    return Err(CliError::Usage("shots and repeats must be at least 1".into()));
                }
                Mode::Shots {
                    n_shots: shots,
                    repeats,
                }
            }
            other => {
                return Err(CliError::Usage(format!(
                    "mode: unknown mode `{other}` (expected exact or shots)"
                )))
            }
        };
        let settings = Settings {
            seed: cfg.seed.unwrap_or(0),
            dist: parse("dist", cfg.dist, "gamma:10:0.5")?,
            n_sample: cfg.n_sample.unwrap_or(50_000),
            dtau: cfg.dtau.unwrap_or(0.002),
            total_time: cfg.total_time.unwrap_or(50.0),
            degree: cfg.degree.unwrap_or(25),
            basis: parse("basis", cfg.basis, "bernstein")?,
            stepper: parse("stepper", cfg.stepper, "exact-step")?,
            ntrain: cfg.ntrain.unwrap_or(100),
            j_thresh: cfg.j_thresh.unwrap_or(1e-5),
            max_iters: cfg.max_iters.unwrap_or(10_000),
            sigma0: cfg.sigma0.unwrap_or(0.3),
            population: cfg.population,
            mode,
            grid: parse("grid", cfg.grid, "500")?,
            kernel: parse("kernel", cfg.kernel, "exponential")?,
            bandwidth_range: (
                cfg.bandwidth_min.unwrap_or(1e-5),
                cfg.bandwidth_max.unwrap_or(1.0),
            ),
            bandwidth_candidates: cfg.bandwidth_candidates.unwrap_or(1000),
            folds: cfg.folds.unwrap_or(5),
        };
        settings.validate()?;
        Ok(settings)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(msg));
        if self.n_sample == 0 {
            return bad("n_sample must be at least 1".into());
        }
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return bad(format!("total_time must be positive, got {}", self.total_time));
        }
        if self.degree == 0 {
            return bad("degree must be at least 1".into());
        }
        if !(self.j_thresh >= 0.0) {
            return bad(format!("j_thresh must be non-negative, got {}", self.j_thresh));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad(format!("sigma0 must be positive, got {}", self.sigma0));
        }
        if matches!(self.population, Some(p) if p < 2) {
            return bad("population must be at least 2".into());
        }
        let (lo, hi) = self.bandwidth_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("bandwidth range [{lo}, {hi}] is invalid"));
        }
        if self.bandwidth_candidates == 0 || self.folds < 2 {
            return bad("need at least one bandwidth candidate and two folds".into());
        }
        Ok(())
    }
}
