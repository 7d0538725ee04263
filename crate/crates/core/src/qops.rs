//! Exact single-qubit linear algebra.
//!
//! Everything here works on fixed 2×2 complex matrices and two-component
//! state vectors, so every operation is closed-form: no series expansions
//! and no general eigensolvers.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Symmetry tolerance used when a matrix must be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `U†U - I` for matrices that must be unitary.
pub const UNITARY_TOL: f64 = 1e-10;
/// Below this norm the traceless part of a Hamiltonian is treated as zero.
const ZERO_HAMILTONIAN: f64 = 1e-14;

/// Single-qubit state `a0|0⟩ + a1|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C2Vector {
    pub a0: Complex64,
    pub a1: Complex64,
}

impl C2Vector {
    pub const fn new(a0: Complex64, a1: Complex64) -> Self {
        Self { a0, a1 }
    }

    pub fn from_real(a0: f64, a1: f64) -> Self {
        Self::new(Complex64::new(a0, 0.0), Complex64::new(a1, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a0.norm_sqr() + self.a1.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.a0 * c, self.a1 * c)
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &C2Vector) -> Complex64 {
        self.a0.conj() * other.a0 + self.a1.conj() * other.a1
    }

    /// Euclidean distance between the amplitude vectors (phase-sensitive).
    pub fn distance(&self, other: &C2Vector) -> f64 {
        ((self.a0 - other.a0).norm_sqr() + (self.a1 - other.a1).norm_sqr()).sqrt()
    }
}

/// Dense 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C2Matrix {
    pub m00: Complex64,
    pub m01: Complex64,
    pub m10: Complex64,
    pub m11: Complex64,
}

impl C2Matrix {
    pub const fn new(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> Self {
        Self { m00, m01, m10, m11 }
    }

    pub fn from_real(m00: f64, m01: f64, m10: f64, m11: f64) -> Self {
        Self::new(
            Complex64::new(m00, 0.0),
            Complex64::new(m01, 0.0),
            Complex64::new(m10, 0.0),
            Complex64::new(m11, 0.0),
        )
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn pauli_x() -> Self {
        Self::new(ZERO, ONE, ONE, ZERO)
    }

    pub const fn pauli_y() -> Self {
        Self::new(ZERO, Complex64::new(0.0, -1.0), I, ZERO)
    }

    pub const fn pauli_z() -> Self {
        Self::new(ONE, ZERO, ZERO, Complex64::new(-1.0, 0.0))
    }

    pub fn diag(d0: Complex64, d1: Complex64) -> Self {
        Self::new(d0, ZERO, ZERO, d1)
    }

    pub fn dagger(&self) -> Self {
        Self::new(
            self.m00.conj(),
            self.m10.conj(),
            self.m01.conj(),
            self.m11.conj(),
        )
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.m00 * c, self.m01 * c, self.m10 * c, self.m11 * c)
    }

    pub fn trace(&self) -> Complex64 {
        self.m00 + self.m11
    }

    pub fn det(&self) -> Complex64 {
        self.m00 * self.m11 - self.m01 * self.m10
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.m00.norm_sqr() + self.m01.norm_sqr() + self.m10.norm_sqr() + self.m11.norm_sqr())
            .sqrt()
    }

    /// Largest entry-wise deviation from being Hermitian.
    pub fn hermitian_defect(&self) -> f64 {
        let off = (self.m01 - self.m10.conj()).norm();
        off.max(self.m00.im.abs()).max(self.m11.im.abs())
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect() <= HERMITIAN_TOL
    }

    /// Frobenius norm of `U†U - I`.
    pub fn unitary_defect(&self) -> f64 {
        (self.dagger() * *self - C2Matrix::identity()).frobenius_norm()
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary_defect() <= UNITARY_TOL
    }

    pub fn rows(&self) -> [[Complex64; 2]; 2] {
        [[self.m00, self.m01], [self.m10, self.m11]]
    }
}

impl Mul for C2Matrix {
    type Output = C2Matrix;

    fn mul(self, r: C2Matrix) -> C2Matrix {
        C2Matrix::new(
            self.m00 * r.m00 + self.m01 * r.m10,
            self.m00 * r.m01 + self.m01 * r.m11,
            self.m10 * r.m00 + self.m11 * r.m10,
            self.m10 * r.m01 + self.m11 * r.m11,
        )
    }
}

impl Mul<C2Vector> for C2Matrix {
    type Output = C2Vector;

    fn mul(self, v: C2Vector) -> C2Vector {
        C2Vector::new(
            self.m00 * v.a0 + self.m01 * v.a1,
            self.m10 * v.a0 + self.m11 * v.a1,
        )
    }
}

impl Mul<f64> for C2Matrix {
    type Output = C2Matrix;

    fn mul(self, k: f64) -> C2Matrix {
        self.scale(Complex64::new(k, 0.0))
    }
}

impl Add for C2Matrix {
    type Output = C2Matrix;

    fn add(self, r: C2Matrix) -> C2Matrix {
        C2Matrix::new(
            self.m00 + r.m00,
            self.m01 + r.m01,
            self.m10 + r.m10,
            self.m11 + r.m11,
        )
    }
}

impl Sub for C2Matrix {
    type Output = C2Matrix;

    fn sub(self, r: C2Matrix) -> C2Matrix {
        C2Matrix::new(
            self.m00 - r.m00,
            self.m01 - r.m01,
            self.m10 - r.m10,
            self.m11 - r.m11,
        )
    }
}

/// `exp(-i·dt·H)` for Hermitian `H`.
///
/// The trace is split off as a global phase; the traceless remainder `K` has
/// eigenvalues `±λ`, so `exp(-i·dt·K) = cos(dt·λ)·I - i·sin(dt·λ)·K/λ`.
pub fn expm_hermitian(h: &C2Matrix, dt: f64) -> Result<C2Matrix> {
    let defect = h.hermitian_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    if !dt.is_finite() {
        return Err(Error::invalid(format!("time step must be finite, got {dt}")));
    }
    let mean = 0.5 * (h.m00.re + h.m11.re);
    let z = 0.5 * (h.m00.re - h.m11.re);
    let w = h.m01;
    let lambda = (z * z + w.norm_sqr()).sqrt();
    let phase = Complex64::from_polar(1.0, -dt * mean);
    if lambda < ZERO_HAMILTONIAN {
        return Ok(C2Matrix::identity().scale(phase));
    }
    let (sin, cos) = (dt * lambda).sin_cos();
    let k = sin / lambda;
    let u = C2Matrix::new(
        Complex64::new(cos, -k * z),
        -I * w * k,
        -I * w.conj() * k,
        Complex64::new(cos, k * z),
    );
    Ok(u.scale(phase))
}

/// `exp(-i·dt·(a·σx + b·σz))` for real `a`, `b`; the hot path of the evolution.
#[inline]
pub(crate) fn expm_xz(a: f64, b: f64, dt: f64) -> C2Matrix {
    let lambda = (a * a + b * b).sqrt();
    if lambda < ZERO_HAMILTONIAN {
        return C2Matrix::identity();
    }
    let (sin, cos) = (dt * lambda).sin_cos();
    let k = sin / lambda;
    C2Matrix::new(
        Complex64::new(cos, -k * b),
        Complex64::new(0.0, -k * a),
        Complex64::new(0.0, -k * a),
        Complex64::new(cos, k * b),
    )
}

pub fn apply(u: &C2Matrix, v: &C2Vector) -> C2Vector {
    *u * *v
}

/// `⟨v|obs|v⟩`, checked to be real.
pub fn expectation(obs: &C2Matrix, v: &C2Vector) -> Result<f64> {
    let value = v.inner(&(*obs * *v));
    if value.im.abs() > 1e-9 {
        return Err(Error::ComplexExpectation(value.im));
    }
    Ok(value.re)
}

/// `⟨v|σz|v⟩` without the generic matrix product.
#[inline]
pub fn sigma_z_expectation(v: &C2Vector) -> f64 {
    v.a0.norm_sqr() - v.a1.norm_sqr()
}

/// `min_γ ‖U − e^{iγ}V‖_F`.
///
/// The optimal phase is `arg tr(V†U)`; the norm is then evaluated directly
/// rather than through `√(4 − 2|tr(U†V)|)`, which loses half the digits when
/// `U ≈ V`.
pub fn phase_distance(u: &C2Matrix, v: &C2Matrix) -> f64 {
    let overlap = (v.dagger() * *u).trace();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        ONE
    };
    (*u - v.scale(phase)).frobenius_norm()
}

/// Haar-distributed random unitary: Gram–Schmidt on complex Gaussian columns.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> C2Matrix {
    let mut gauss = || Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    let c0 = C2Vector::new(gauss(), gauss());
    let c1 = C2Vector::new(gauss(), gauss());
    let q0 = c0.scale(Complex64::new(1.0 / c0.norm(), 0.0));
    let proj = q0.inner(&c1);
    let r1 = C2Vector::new(c1.a0 - q0.a0 * proj, c1.a1 - q0.a1 * proj);
    let q1 = r1.scale(Complex64::new(1.0 / r1.norm(), 0.0));
    C2Matrix::new(q0.a0, q1.a0, q0.a1, q1.a1)
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R) -> C2Matrix {
    let d0: f64 = rng.sample(StandardNormal);
    let d1: f64 = rng.sample(StandardNormal);
    let off = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    C2Matrix::new(Complex64::new(d0, 0.0), off, off.conj(), Complex64::new(d1, 0.0))
}
