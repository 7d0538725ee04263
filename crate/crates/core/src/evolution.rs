//! Discretized adiabatic evolution under `H(s) = (1 − s)·σx − s·σz`.
//!
//! The state starts in the ground state of `σx` (where `⟨σz⟩ = 0`) and is
//! carried towards the ground state of `−σz` (where `⟨σz⟩ = 1`). The
//! `⟨σz⟩` trajectory is the regression model fitted to an empirical CDF.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{expm_xz, sigma_z_expectation, C2Matrix, C2Vector};
use crate::schedule::ScheduleParams;

pub const DEFAULT_DTAU: f64 = 0.002;

/// How a single time step is propagated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepper {
    /// `exp(−i·T·dτ·H(s))` in closed form.
    #[default]
    ExactStep,
    /// Strang splitting: half `σx` step, full `σz` step, half `σx` step.
    SecondOrderSplit,
}

impl std::str::FromStr for Stepper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-step" | "exact" => Ok(Stepper::ExactStep),
            "second-order-split" | "split" => Ok(Stepper::SecondOrderSplit),
            other => Err(Error::invalid(format!(
                "unknown stepper `{other}` (expected exact-step or second-order-split)"
            ))),
        }
    }
}

impl std::fmt::Display for Stepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stepper::ExactStep => "exact-step",
            Stepper::SecondOrderSplit => "second-order-split",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    dtau: f64,
    stepper: Stepper,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dtau: DEFAULT_DTAU,
            stepper: Stepper::ExactStep,
        }
    }
}

impl EvolutionConfig {
    /// `dtau` must lie in `(0, 0.1]` and divide the unit interval evenly.
    pub fn new(dtau: f64, stepper: Stepper) -> Result<Self> {
        if !(dtau > 0.0 && dtau <= 0.1) {
            return Err(Error::invalid(format!("dτ must lie in (0, 0.1], got {dtau}")));
        }
        let n = (1.0 / dtau).round();
        if (n * dtau - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "1/dτ must be an integer, got 1/{dtau} = {}",
                1.0 / dtau
            )));
        }
        Ok(Self { dtau, stepper })
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn stepper(&self) -> Stepper {
        self.stepper
    }

    pub fn steps(&self) -> usize {
        (1.0 / self.dtau).round() as usize
    }

    /// Grid `τⱼ = j/N`, `j = 0…N`; ends exactly on one.
    pub fn taus(&self) -> Vec<f64> {
        let n = self.steps();
        (0..=n).map(|j| j as f64 / n as f64).collect()
    }

    /// Midpoints of the steps, where the schedule is sampled.
    pub fn step_midpoints(&self) -> Vec<f64> {
        let n = self.steps();
        (0..n).map(|j| (j as f64 + 0.5) / n as f64).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub taus: Vec<f64>,
    pub states: Vec<C2Vector>,
    pub expectations: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn final_expectation(&self) -> f64 {
        *self.expectations.last().expect("trajectory is never empty")
    }

    /// CSV with columns `tau,re0,im0,re1,im1,sigma_z`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau,re0,im0,re1,im1,sigma_z")?;
        for ((tau, psi), z) in self.taus.iter().zip(&self.states).zip(&self.expectations) {
            writeln!(
                w,
                "{tau},{},{},{},{},{z}",
                psi.a0.re, psi.a0.im, psi.a1.re, psi.a1.im
            )?;
        }
        Ok(())
    }
}

/// `H(s) = (1 − s)·σx − s·σz = [[−s, 1 − s], [1 − s, s]]`.
pub fn hamiltonian_at(s: f64) -> C2Matrix {
    C2Matrix::from_real(-s, 1.0 - s, 1.0 - s, s)
}

/// `|−⟩ = (|0⟩ − |1⟩)/√2`, the ground state of `σx`.
pub fn initial_state() -> C2Vector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    C2Vector::from_real(h, -h)
}

#[inline]
fn step_operator(s: f64, dt: f64, stepper: Stepper) -> C2Matrix {
    match stepper {
        Stepper::ExactStep => expm_xz(1.0 - s, -s, dt),
        Stepper::SecondOrderSplit => {
            let half_x = expm_xz(1.0 - s, 0.0, 0.5 * dt);
            let full_z = expm_xz(0.0, -s, dt);
            half_x * full_z * half_x
        }
    }
}

/// Evolves [`initial_state`] across the τ grid. Step `j` (from `τⱼ` to
/// `τⱼ₊₁`) uses the schedule at the step midpoint and physical duration `T·dτ`.
pub fn evolve(params: &ScheduleParams, cfg: &EvolutionConfig) -> Trajectory {
    let s_mid: Vec<f64> = cfg.step_midpoints().iter().map(|&t| params.s(t)).collect();
    evolve_schedule(&s_mid, params.total_time(), cfg)
}

/// [`evolve`] with schedule values precomputed at the step midpoints.
pub fn evolve_schedule(s_mid: &[f64], total_time: f64, cfg: &EvolutionConfig) -> Trajectory {
    assert_eq!(s_mid.len(), cfg.steps(), "one schedule value per step");
    let dt = total_time * cfg.dtau;
    let mut psi = initial_state();
    let mut states = Vec::with_capacity(s_mid.len() + 1);
    let mut expectations = Vec::with_capacity(s_mid.len() + 1);
    states.push(psi);
    expectations.push(sigma_z_expectation(&psi));
    for &s in s_mid {
        psi = step_operator(s, dt, cfg.stepper) * psi;
        states.push(psi);
        expectations.push(sigma_z_expectation(&psi));
    }
    Trajectory {
        taus: cfg.taus(),
        states,
        expectations,
    }
}

/// Only the `⟨σz⟩` values, without storing states.
pub fn sigma_z_trajectory(s_mid: &[f64], total_time: f64, cfg: &EvolutionConfig) -> Vec<f64> {
    let dt = total_time * cfg.dtau;
    let mut psi = initial_state();
    let mut out = Vec::with_capacity(s_mid.len() + 1);
    out.push(sigma_z_expectation(&psi));
    for &s in s_mid {
        psi = step_operator(s, dt, cfg.stepper) * psi;
        out.push(sigma_z_expectation(&psi));
    }
    out
}

/// Largest amplitude difference between two trajectories sampled on the
/// same grid.
pub fn max_state_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| x.distance(y))
        .fold(0.0, f64::max)
}
