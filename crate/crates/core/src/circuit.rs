//! Continuum propagator of the adiabatic evolution, its `Rz·Rx·Rz` circuit
//! form, and circuit execution (exact or with binomial shot noise).
//!
//! In the adiabatic limit the evolution up to `τ` is
//! `C_τ = P(s(τ))·diag(e^{−i𝓘}, e^{+i𝓘})·P(s(0))⁻¹`, where `P` diagonalizes
//! `H(s)` and `𝓘 = T·∫₀^τ λ`. The circuit angles are read off `C_τ`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::initial_state;
use crate::qops::{sigma_z_expectation, C2Matrix, C2Vector};
use crate::rng::{derive_seed, seeded};
use crate::schedule::{lambda_of, phase_integral, ScheduleParams};

/// Moduli below this are treated as zero when taking complex arguments.
const ARG_FLOOR: f64 = 1e-12;

/// Euler angles of `Rz(φ)·Rx(θ)·Rz(ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitAngles {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    /// Evolution fraction the angles were compiled for, when known.
    pub t: Option<f64>,
}

impl CircuitAngles {
    pub fn new(phi: f64, theta: f64, psi: f64) -> Self {
        Self {
            phi,
            theta,
            psi,
            t: None,
        }
    }

    pub fn get(&self, index: AngleIndex) -> f64 {
        match index {
            AngleIndex::Phi => self.phi,
            AngleIndex::Theta => self.theta,
            AngleIndex::Psi => self.psi,
        }
    }

    pub fn shifted(&self, index: AngleIndex, delta: f64) -> Self {
        let mut out = *self;
        match index {
            AngleIndex::Phi => out.phi += delta,
            AngleIndex::Theta => out.theta += delta,
            AngleIndex::Psi => out.psi += delta,
        }
        out
    }

    /// `Rz(φ)·Rx(θ)·Rz(ψ)`.
    pub fn unitary(&self) -> C2Matrix {
        rz(self.phi) * rx(self.theta) * rz(self.psi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AngleIndex {
    Phi,
    Theta,
    Psi,
}

impl AngleIndex {
    pub const ALL: [AngleIndex; 3] = [AngleIndex::Phi, AngleIndex::Theta, AngleIndex::Psi];
}

/// How expectation values are obtained from a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    /// `repeats` independent estimates of `n_shots` measurements each.
    Shots { n_shots: u64, repeats: usize },
}

impl Mode {
    pub fn label(&self) -> String {
        match self {
            Mode::Exact => "exact".to_string(),
            Mode::Shots { n_shots, repeats } => format!("shots({n_shots},{repeats})"),
        }
    }
}

/// `Rz(α) = diag(e^{−iα/2}, e^{iα/2})`.
pub fn rz(alpha: f64) -> C2Matrix {
    C2Matrix::diag(
        Complex64::from_polar(1.0, -0.5 * alpha),
        Complex64::from_polar(1.0, 0.5 * alpha),
    )
}

/// `Rx(α) = exp(−iα·σx/2)`.
pub fn rx(alpha: f64) -> C2Matrix {
    let (s, c) = (0.5 * alpha).sin_cos();
    C2Matrix::new(
        Complex64::new(c, 0.0),
        Complex64::new(0.0, -s),
        Complex64::new(0.0, -s),
        Complex64::new(c, 0.0),
    )
}

/// Eigendecomposition `H(s) = P·D·P⁻¹` with `D = diag(λ, −λ)`.
///
/// `P = Λ·[[r, 1], [1, −r]]` with `r = (1 − s)/(λ + s)` and `Λ = 1/√(1 + r²)`;
/// this form of `r` equals `(λ − s)/(1 − s)` but has no `s → 1` singularity.
/// `P` is real, symmetric and orthogonal, so `P⁻¹ = P`. Its second column is
/// the ground state.
pub fn diagonalize(s: f64) -> (C2Matrix, C2Matrix) {
    let lambda = lambda_of(s);
    let r = (1.0 - s) / (lambda + s);
    let norm = 1.0 / (1.0 + r * r).sqrt();
    let p = C2Matrix::from_real(norm * r, norm, norm, -norm * r);
    let d = C2Matrix::from_real(lambda, 0.0, 0.0, -lambda);
    (p, d)
}

/// Adiabatic-limit propagator from `τ = 0` to `tau`.
pub fn propagator(params: &ScheduleParams, tau: f64) -> Result<C2Matrix> {
    let integral = phase_integral(params, tau)?;
    Ok(propagator_with_integral(params.s(tau), integral))
}

/// Propagator at schedule value `s` for a given phase integral `𝓘`.
pub fn propagator_with_integral(s: f64, integral: f64) -> C2Matrix {
    let (p_t, _) = diagonalize(s);
    let (p_0, _) = diagonalize(0.0);
    let phases = C2Matrix::diag(
        Complex64::from_polar(1.0, -integral),
        Complex64::from_polar(1.0, integral),
    );
    p_t * phases * p_0
}

/// Row 0 of the propagator from the printed closed form
///
/// `c₀ⱼ = (1 − s)/(s·√(λ(λ − s)))·{cos𝓘·(1 + (−1)ʲ·r) + i·sin𝓘·(1 − (−1)ʲ·r)}`,
/// `r = (λ − s)/(1 − s)`, evaluated verbatim. It refers to the sign-flipped
/// Hamiltonian `s·σz + (1 − s)·σx`. See [`compare_closed_form`] for how it
/// relates to [`propagator`].
pub fn closed_form_elements(params: &ScheduleParams, tau: f64) -> Result<(Complex64, Complex64)> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!(
            "closed form is singular at the endpoints; τ must lie in (0, 1), got {tau}"
        )));
    }
    let s = params.s(tau);
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid(format!(
            "closed form is singular for s ∈ {{0, 1}}; s(τ={tau}) = {s}"
        )));
    }
    let integral = phase_integral(params, tau)?;
    Ok(closed_form_raw(s, integral))
}

fn closed_form_raw(s: f64, integral: f64) -> (Complex64, Complex64) {
    let lambda = lambda_of(s);
    let r = (lambda - s) / (1.0 - s);
    let pref = (1.0 - s) / (s * (lambda * (lambda - s)).sqrt());
    let (sin, cos) = integral.sin_cos();
    let elem = |sign: f64| {
        Complex64::new(pref * cos * (1.0 + sign * r), pref * sin * (1.0 - sign * r))
    };
    (elem(1.0), elem(-1.0))
}

/// Outcome of checking the printed closed form against the numeric propagator.
#[derive(Debug, Clone, Copy)]
pub struct ClosedFormComparison {
    pub s: f64,
    /// `|c₀₀|² + |c₀₁|²` of the printed form; a unitary row gives one.
    pub row_norm_sqr: f64,
    /// Phase-insensitive distance between the printed row and the numeric row.
    pub verbatim_distance: f64,
    /// Same, after scaling the printed row by `s/2` and flipping the sign of
    /// `𝓘` (the printed phases run backwards with respect to `e^{−i∫D}`).
    pub corrected_distance: f64,
}

/// Compares [`closed_form_elements`] with row 0 of the numeric propagator in
/// the same (sign-flipped) Hamiltonian convention, `σx·C·σx`.
pub fn compare_closed_form(params: &ScheduleParams, tau: f64) -> Result<ClosedFormComparison> {
    let (c00, c01) = closed_form_elements(params, tau)?;
    let s = params.s(tau);
    let integral = phase_integral(params, tau)?;
    let flipped = C2Matrix::pauli_x() * propagator_with_integral(s, integral) * C2Matrix::pauli_x();
    let numeric = C2Vector::new(flipped.m00, flipped.m01);
    let verbatim = C2Vector::new(c00, c01);
    let (k00, k01) = closed_form_raw(s, -integral);
    let corrected = C2Vector::new(k00, k01).scale(Complex64::new(0.5 * s, 0.0));
    Ok(ClosedFormComparison {
        s,
        row_norm_sqr: verbatim.norm_sqr(),
        verbatim_distance: vector_phase_distance(&verbatim, &numeric),
        corrected_distance: vector_phase_distance(&corrected, &numeric),
    })
}

fn vector_phase_distance(a: &C2Vector, b: &C2Vector) -> f64 {
    let overlap = b.inner(a);
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    a.distance(&b.scale(phase))
}

/// Euler angles with `Rz(φ)·Rx(θ)·Rz(ψ) = C` up to global phase.
///
/// `C` is first brought into SU(2) by dividing out `√det C`; then, with
/// `a₀ = arg c₀₀` and `a₁ = arg c₀₁`,
/// `φ = π/2 − a₁ − a₀`, `θ = −2·arccos|c₀₀|`, `ψ = a₁ − π/2 − a₀`.
/// `arccos|c₀₀|` is evaluated as `atan2(|c₀₁|, |c₀₀|)`, which is the same
/// angle for a unitary row and stays well conditioned near `θ = 0`.
pub fn euler_angles(c: &C2Matrix) -> Result<CircuitAngles> {
    let defect = c.unitary_defect();
    if defect > crate::qops::UNITARY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    let root = c.det().sqrt();
    let su2 = c.scale(root.inv());
    let (c00, c01) = (su2.m00, su2.m01);
    let arg = |z: Complex64| if z.norm() < ARG_FLOOR { 0.0 } else { z.arg() };
    let (a0, a1) = (arg(c00), arg(c01));
    Ok(CircuitAngles::new(
        FRAC_PI_2 - a1 - a0,
        -2.0 * c01.norm().atan2(c00.norm()),
        a1 - FRAC_PI_2 - a0,
    ))
}

/// Circuit angles of the propagator at `tau`.
pub fn angles_at(params: &ScheduleParams, tau: f64) -> Result<CircuitAngles> {
    let mut angles = euler_angles(&propagator(params, tau)?)?;
    angles.t = Some(tau);
    Ok(angles)
}

/// `⟨ψ(0)|C†·σz·C|ψ(0)⟩` with `C` rebuilt from the angles.
pub fn execute_exact(angles: &CircuitAngles) -> f64 {
    sigma_z_expectation(&(angles.unitary() * initial_state()))
}

/// Probability of measuring `|0⟩` after the circuit.
pub fn prob_zero(angles: &CircuitAngles) -> f64 {
    (angles.unitary() * initial_state()).a0.norm_sqr().clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotResult {
    /// `2k/n − 1`, the sample mean of `σz`.
    pub estimate: f64,
    /// Counts of outcomes `0` and `1`.
    pub counts: (u64, u64),
}

pub fn execute_shots_with<R: Rng + ?Sized>(
    angles: &CircuitAngles,
    n_shots: u64,
    rng: &mut R,
) -> Result<ShotResult> {
    if n_shots == 0 {
        return Err(Error::invalid("need at least one shot"));
    }
    let p0 = prob_zero(angles);
    let k = Binomial::new(n_shots, p0)
        .map_err(|e| Error::invalid(format!("binomial sampler: {e}")))?
        .sample(rng);
    Ok(ShotResult {
        estimate: 2.0 * k as f64 / n_shots as f64 - 1.0,
        counts: (k, n_shots - k),
    })
}

/// Measures the circuit `n_shots` times in the computational basis.
pub fn execute_shots(angles: &CircuitAngles, n_shots: u64, seed: u64) -> Result<ShotResult> {
    execute_shots_with(angles, n_shots, &mut seeded(seed))
}

/// Mean and spread of a (possibly repeated) estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation across repeats; zero in exact mode.
    pub std: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std = if samples.len() > 1 {
            (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Model CDF (the circuit's `⟨σz⟩`) at `tau`.
pub fn cdf_at(params: &ScheduleParams, tau: f64, mode: Mode, seed: u64) -> Result<Estimate> {
    let angles = angles_at(params, tau)?;
    match mode {
        Mode::Exact => Ok(Estimate {
            mean: execute_exact(&angles),
            std: 0.0,
        }),
        Mode::Shots { n_shots, repeats } => {
            if repeats == 0 {
                return Err(Error::invalid("need at least one repeat"));
            }
            let samples = (0..repeats)
                .map(|r| {
                    execute_shots(&angles, n_shots, derive_seed(seed, &[r as u64]))
                        .map(|s| s.estimate)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Estimate::from_samples(&samples))
        }
    }
}
