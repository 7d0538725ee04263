//! PDF of the model: the τ-derivative of the circuit expectation, obtained
//! as `Σₖ ∂E/∂aₖ · daₖ/dτ` with parameter-shift gradients for the gate
//! angles `aₖ` and finite differences for the classical angle functions.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    angles_at, euler_angles, execute_exact, execute_shots, propagator_with_integral, AngleIndex,
    CircuitAngles, Estimate, Mode,
};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::schedule::{phase_increment, phase_integral, ScheduleParams};
use crate::training::AffineTransform;

/// Finite-difference step for the angle functions.
pub const ANGLE_FD_STEP: f64 = 1e-5;

/// One point of the model PDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfEvaluation {
    pub t: f64,
    pub x: f64,
    /// Density per unit `t`.
    pub rho_tau: f64,
    /// Density per unit `x`.
    pub rho_x: f64,
    pub mode: Mode,
    /// Standard deviation across repeats; zero in exact mode.
    pub uncertainty: f64,
    /// Set when the estimate is negative, which shot noise can cause.
    pub negative: bool,
}

/// Circuit expectation at `angles`: exact, or one shot-noise estimate.
fn expectation(angles: &CircuitAngles, n_shots: Option<u64>, seed: u64) -> Result<f64> {
    match n_shots {
        None => Ok(execute_exact(angles)),
        Some(n) => Ok(execute_shots(angles, n, seed)?.estimate),
    }
}

fn shift_rule(angles: &CircuitAngles, index: AngleIndex, n_shots: Option<u64>, seed: u64) -> Result<f64> {
    let plus = expectation(&angles.shifted(index, FRAC_PI_2), n_shots, derive_seed(seed, &[0]))?;
    let minus = expectation(&angles.shifted(index, -FRAC_PI_2), n_shots, derive_seed(seed, &[1]))?;
    Ok(0.5 * (plus - minus))
}

/// `[E(a + π/2) − E(a − π/2)]/2` for the angle `index`. In shots mode each
/// shifted circuit is measured `n_shots` times per repeat and the mean over
/// repeats is returned.
pub fn psr_partial(angles: &CircuitAngles, index: AngleIndex, mode: Mode, seed: u64) -> Result<f64> {
    match mode {
        Mode::Exact => shift_rule(angles, index, None, seed),
        Mode::Shots { n_shots, repeats } => {
            check_repeats(repeats)?;
            let total = (0..repeats)
                .map(|r| shift_rule(angles, index, Some(n_shots), derive_seed(seed, &[r as u64])))
                .sum::<Result<f64>>()?;
            Ok(total / repeats as f64)
        }
    }
}

fn check_repeats(repeats: usize) -> Result<()> {
    if repeats == 0 {
        return Err(Error::invalid("need at least one repeat"));
    }
    Ok(())
}

/// `b − a` wrapped into `(−π, π]`.
pub fn wrapped_difference(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Derivative of an angle-valued path by finite differences of step `h`,
/// unwrapping `2π` jumps. Central differences in the interior; second-order
/// one-sided differences within `h` of `0` or `1`.
pub fn angle_path_derivative<F>(path: &F, tau: f64, h: f64) -> Result<[f64; 3]>
where
    F: Fn(f64) -> Result<[f64; 3]>,
{
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("τ must lie in [0, 1], got {tau}")));
    }
    let mut out = [0.0; 3];
    if tau - h >= 0.0 && tau + h <= 1.0 {
        let (lo, hi) = (path(tau - h)?, path(tau + h)?);
        for k in 0..3 {
            out[k] = wrapped_difference(lo[k], hi[k]) / (2.0 * h);
        }
    } else {
        let dir = if tau - h < 0.0 { 1.0 } else { -1.0 };
        let f0 = path(tau)?;
        let f1 = path(tau + dir * h)?;
        let f2 = path(tau + dir * 2.0 * h)?;
        for k in 0..3 {
            let d1 = wrapped_difference(f0[k], f1[k]);
            let d2 = wrapped_difference(f0[k], f2[k]);
            out[k] = dir * (4.0 * d1 - d2) / (2.0 * h);
        }
    }
    Ok(out)
}

/// Step-halving refinement of [`angle_path_derivative`]: halves `h` until
/// two successive estimates agree to [`FD_REL_TOL`] (or `h` reaches
/// [`MIN_FD_STEP`]) and returns their Richardson extrapolation. Near the
/// points where the Euler parametrization degenerates (`θ ∈ {0, −π}`) the
/// angles turn sharply and the starting step is too coarse.
pub fn refined_angle_derivative<F>(path: F, tau: f64, h0: f64) -> Result<[f64; 3]>
where
    F: Fn(f64) -> Result<[f64; 3]>,
{
    let mut h = h0;
    let mut prev = angle_path_derivative(&path, tau, h)?;
    loop {
        let next = angle_path_derivative(&path, tau, 0.5 * h)?;
        let mut rich = [0.0; 3];
        let mut converged = true;
        for k in 0..3 {
            rich[k] = (4.0 * next[k] - prev[k]) / 3.0;
            converged &= (next[k] - prev[k]).abs() <= FD_REL_TOL * next[k].abs().max(1.0);
        }
        h *= 0.5;
        if converged || h < MIN_FD_STEP {
            return Ok(rich);
        }
        prev = next;
    }
}

/// `|sin θ|` below which the Euler angles count as degenerate.
const DEGENERATE_SIN: f64 = 1e-9;

/// Shift applied to evaluation points at degenerate angles.
pub const DEGENERATE_OFFSET: f64 = 1e-9;

/// Relative agreement required between successive step halvings.
pub const FD_REL_TOL: f64 = 1e-7;

/// Smallest step tried by [`refined_angle_derivative`].
pub const MIN_FD_STEP: f64 = 1e-9;

/// Euler angles along the evolution near `tau`. The phase integral is
/// computed once at `tau`; nearby points add a single-panel increment, so
/// the path is smooth at the scale of the difference steps.
fn angle_path(params: &ScheduleParams, tau: f64) -> Result<impl Fn(f64) -> Result<[f64; 3]> + '_> {
    let base = phase_integral(params, tau)?;
    Ok(move |t: f64| {
        let integral = base + phase_increment(params, tau, t);
        let a = euler_angles(&propagator_with_integral(params.s(t), integral))?;
        Ok([a.phi, a.theta, a.psi])
    })
}

/// `(dφ/dτ, dθ/dτ, dψ/dτ)`, refined from the starting step [`ANGLE_FD_STEP`].
pub fn angle_time_derivatives(params: &ScheduleParams, tau: f64) -> Result<[f64; 3]> {
    angle_time_derivatives_with_step(params, tau, ANGLE_FD_STEP)
}

pub fn angle_time_derivatives_with_step(params: &ScheduleParams, tau: f64, h: f64) -> Result<[f64; 3]> {
    refined_angle_derivative(angle_path(params, tau)?, tau, h)
}

/// `ρ(τ) = Σₖ PSRₖ · daₖ/dτ`. Shots mode repeats the whole estimate
/// `repeats` times with independent streams and reports mean and spread.
///
/// Where the circuit sits on a degenerate point of the Euler parametrization
/// (`sin θ ≈ 0`, as at `τ = 0` where the propagator is the identity), `ψ` is
/// fixed by convention rather than by continuity, so the density is
/// evaluated [`DEGENERATE_OFFSET`] further into the interior instead.
pub fn pdf_at(params: &ScheduleParams, tau: f64, mode: Mode, seed: u64) -> Result<PdfEvaluation> {
    let mut at = tau;
    let mut angles = angles_at(params, at)?;
    if angles.theta.sin().abs() < DEGENERATE_SIN {
        at += if tau < 0.5 { DEGENERATE_OFFSET } else { -DEGENERATE_OFFSET };
        angles = angles_at(params, at)?;
    }
    let rates = angle_time_derivatives(params, at)?;
    let one = |n_shots: Option<u64>, stream: u64| -> Result<f64> {
        AngleIndex::ALL
            .iter()
            .zip(rates)
            .enumerate()
            .map(|(k, (&index, rate))| {
                Ok(shift_rule(&angles, index, n_shots, derive_seed(stream, &[k as u64]))? * rate)
            })
            .sum()
    };
    let est = match mode {
        Mode::Exact => Estimate {
            mean: one(None, seed)?,
            std: 0.0,
        },
        Mode::Shots { n_shots, repeats } => {
            check_repeats(repeats)?;
            let samples = (0..repeats)
                .map(|r| one(Some(n_shots), derive_seed(seed, &[r as u64])))
                .collect::<Result<Vec<_>>>()?;
            Estimate::from_samples(&samples)
        }
    };
    Ok(PdfEvaluation {
        t: tau,
        x: tau,
        rho_tau: est.mean,
        rho_x: est.mean,
        mode,
        uncertainty: est.std,
        negative: est.mean < 0.0,
    })
}

/// Maps a point back to the original domain: `x = x_min + t·(x_max − x_min)`,
/// `ρ_x = ρ_τ/(x_max − x_min)`.
pub fn pdf_original_units(eval: &PdfEvaluation, tr: &AffineTransform) -> PdfEvaluation {
    PdfEvaluation {
        x: tr.inverse(eval.t),
        rho_x: eval.rho_tau / tr.width(),
        uncertainty: eval.uncertainty,
        ..eval.clone()
    }
}

/// [`pdf_at`] on every grid point in parallel, in original units. Point `j`
/// uses the stream `(seed, j)`.
pub fn pdf_on_grid(
    params: &ScheduleParams,
    taus: &[f64],
    mode: Mode,
    seed: u64,
    tr: &AffineTransform,
) -> Result<Vec<PdfEvaluation>> {
    taus.par_iter()
        .enumerate()
        .map(|(j, &t)| {
            pdf_at(params, t, mode, derive_seed(seed, &[j as u64])).map(|e| pdf_original_units(&e, tr))
        })
        .collect()
}
