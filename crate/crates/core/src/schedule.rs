//! Scheduling function `s(τ; θ)`, the instantaneous gap `λ(s)` and the
//! accumulated phase `T·∫λ`.
//!
//! Both supported bases write `s` as a normalized positive combination of
//! `p` nondecreasing polynomials that vanish at `τ = 0` and equal one at
//! `τ = 1`, so `s(0) = 0`, `s(1) = 1` and monotonicity hold by construction:
//!
//! * [`Basis::Monomial`]: `τ, τ², …, τᵖ`. Every such combination is convex,
//!   so it can only describe CDFs that rise late.
//! * [`Basis::Bernstein`]: `bᵢ(τ) = P[Binomial(p, τ) ≥ i]`, the cumulative
//!   Bernstein polynomials. Same degree and parameter count, but positive
//!   combinations cover every monotone Bernstein polynomial, concave or not.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Offset added by [`project_positive`] so coefficients never reach zero.
pub const POSITIVITY_EPS: f64 = 1e-12;

/// Convergence tolerance for successive panel doublings of the phase integral.
const PHASE_INTEGRAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Monomial,
    #[default]
    Bernstein,
}

impl std::str::FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monomial" => Ok(Basis::Monomial),
            "bernstein" => Ok(Basis::Bernstein),
            other => Err(Error::invalid(format!(
                "unknown basis `{other}` (expected monomial or bernstein)"
            ))),
        }
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Basis::Monomial => "monomial",
            Basis::Bernstein => "bernstein",
        })
    }
}

impl Basis {
    /// Values of the `degree` basis functions at `tau`, written into `out`.
    pub fn row_into(self, degree: usize, tau: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), degree);
        match self {
            Basis::Monomial => {
                let mut pow = 1.0;
                for v in out.iter_mut() {
                    pow *= tau;
                    *v = pow;
                }
            }
            Basis::Bernstein => {
                // Suffix sums of the Binomial(p, τ) mass function.
                let q = 1.0 - tau;
                let mut tail = 0.0;
                let mut binom = 1.0;
                for k in (1..=degree).rev() {
                    if k < degree {
                        binom = binom * (k + 1) as f64 / (degree - k) as f64;
                    }
                    tail += binom * tau.powi(k as i32) * q.powi((degree - k) as i32);
                    out[k - 1] = tail;
                }
            }
        }
    }

    pub fn row(self, degree: usize, tau: f64) -> Vec<f64> {
        let mut out = vec![0.0; degree];
        self.row_into(degree, tau, &mut out);
        out
    }
}

/// Trainable schedule: coefficients, basis and total physical time `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct ScheduleParams {
    theta: Vec<f64>,
    total_time: f64,
    basis: Basis,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    theta: Vec<f64>,
    #[serde(rename = "T")]
    total_time: f64,
    basis: Basis,
}

impl TryFrom<RawSchedule> for ScheduleParams {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        ScheduleParams::new(raw.theta, raw.total_time, raw.basis)
    }
}

impl From<ScheduleParams> for RawSchedule {
    fn from(p: ScheduleParams) -> Self {
        RawSchedule {
            theta: p.theta,
            total_time: p.total_time,
            basis: p.basis,
        }
    }
}

impl ScheduleParams {
    pub fn new(theta: Vec<f64>, total_time: f64, basis: Basis) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::invalid("schedule needs at least one coefficient"));
        }
        if let Some(bad) = theta.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::invalid(format!(
                "schedule coefficients must be positive, got {bad}"
            )));
        }
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(Error::invalid(format!(
                "total time must be positive, got {total_time}"
            )));
        }
        Ok(Self {
            theta,
            total_time,
            basis,
        })
    }

    pub fn monomial(theta: Vec<f64>, total_time: f64) -> Result<Self> {
        Self::new(theta, total_time, Basis::Monomial)
    }

    pub fn bernstein(theta: Vec<f64>, total_time: f64) -> Result<Self> {
        Self::new(theta, total_time, Basis::Bernstein)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn degree(&self) -> usize {
        self.theta.len()
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn with_total_time(&self, total_time: f64) -> Result<Self> {
        Self::new(self.theta.clone(), total_time, self.basis)
    }

    /// `s(τ)` without range checks; `tau` must lie in `[0, 1]`.
    pub fn s(&self, tau: f64) -> f64 {
        let eta: f64 = self.theta.iter().sum();
        let p = self.degree();
        let mut acc = 0.0;
        match self.basis {
            Basis::Monomial => {
                // Horner on Σ θᵢ τⁱ = τ(θ₁ + τ(θ₂ + …)).
                for &t in self.theta.iter().rev() {
                    acc = acc * tau + t;
                }
                acc *= tau;
            }
            Basis::Bernstein => {
                let mut row = vec![0.0; p];
                self.basis.row_into(p, tau, &mut row);
                acc = row.iter().zip(&self.theta).map(|(b, t)| b * t).sum();
            }
        }
        (acc / eta).clamp(0.0, 1.0)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::invalid(format!("τ must lie in [0, 1], got {tau}")))
    }
}

/// `s(τ; θ) = Σᵢ θᵢ bᵢ(τ) / Σᵢ θᵢ`.
pub fn eval_s(params: &ScheduleParams, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(params.s(tau))
}

/// Maps an unconstrained optimizer vector to strictly positive coefficients,
/// `θᵢ = rawᵢ² + ε`.
pub fn project_positive(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::invalid("cannot project an empty parameter vector"));
    }
    Ok(raw.iter().map(|r| r * r + POSITIVITY_EPS).collect())
}

/// Half the spectral gap of `H(s)`: `λ = √(2s² − 2s + 1)`.
#[inline]
pub fn lambda_of(s: f64) -> f64 {
    (2.0 * s * s - 2.0 * s + 1.0).sqrt()
}

/// `T·∫₀^τ λ(s(u; θ)) du`.
pub fn phase_integral(params: &ScheduleParams, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let integral = quadrature::integrate(
        |u| lambda_of(params.s(u)),
        0.0,
        tau,
        PHASE_INTEGRAL_TOL / params.total_time,
    );
    Ok(params.total_time * integral)
}

/// `T·∫ₐᵇ λ(s(u)) du` with a single 20-point panel; accurate to rounding
/// for short intervals and smooth in both endpoints.
pub fn phase_increment(params: &ScheduleParams, a: f64, b: f64) -> f64 {
    params.total_time * quadrature::default_rule().integrate(|u| lambda_of(params.s(u)), a, b)
}

/// Basis functions tabulated on a fixed τ grid, so that schedule values for
/// many coefficient vectors cost one dot product per grid point.
#[derive(Debug, Clone)]
pub struct BasisTable {
    basis: Basis,
    degree: usize,
    rows: Vec<f64>,
    len: usize,
}

impl BasisTable {
    pub fn new(basis: Basis, degree: usize, taus: &[f64]) -> Self {
        let mut rows = vec![0.0; degree * taus.len()];
        for (chunk, &tau) in rows.chunks_mut(degree.max(1)).zip(taus) {
            basis.row_into(degree, tau, chunk);
        }
        Self {
            basis,
            degree,
            rows,
            len: taus.len(),
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `s` at every tabulated τ for coefficients `theta`.
    pub fn schedule_values(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.degree, "coefficient count mismatch");
        let eta: f64 = theta.iter().sum();
        self.rows
            .chunks(self.degree)
            .map(|row| {
                let v: f64 = row.iter().zip(theta).map(|(b, t)| b * t).sum();
                (v / eta).clamp(0.0, 1.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn mono(theta: &[f64]) -> ScheduleParams {
        ScheduleParams::monomial(theta.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn endpoints_are_pinned() {
        for basis in [Basis::Monomial, Basis::Bernstein] {
            let p = ScheduleParams::new(vec![0.3, 2.0, 0.7, 1.1], 50.0, basis).unwrap();
            assert_eq!(eval_s(&p, 0.0).unwrap(), 0.0);
            assert!((eval_s(&p, 1.0).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn monomial_values() {
        assert!((eval_s(&mono(&[1.0]), 0.3).unwrap() - 0.3).abs() < 1e-15);
        assert!((eval_s(&mono(&[1.0, 1.0]), 0.5).unwrap() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn bernstein_degree_one_is_linear() {
        let p = ScheduleParams::bernstein(vec![2.5], 1.0).unwrap();
        assert!((p.s(0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bernstein_row_matches_binomial_tail() {
        // P[Bin(3, 0.4) ≥ i] for i = 1, 2, 3.
        let row = Basis::Bernstein.row(3, 0.4);
        let expected = [1.0 - 0.6f64.powi(3), 3.0 * 0.16 * 0.6 + 0.064, 0.064];
        for (a, b) in row.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn eval_rejects_out_of_range_tau() {
        let p = mono(&[1.0]);
        assert!(eval_s(&p, -0.01).is_err());
        assert!(eval_s(&p, 1.01).is_err());
        assert!(eval_s(&p, f64::NAN).is_err());
    }

    #[test]
    fn constructor_rejects_bad_inputs() {
        assert!(ScheduleParams::monomial(vec![1.0, 0.0], 1.0).is_err());
        assert!(ScheduleParams::monomial(vec![1.0, -2.0], 1.0).is_err());
        assert!(ScheduleParams::monomial(vec![], 1.0).is_err());
        assert!(ScheduleParams::monomial(vec![1.0], 0.0).is_err());
        assert!(ScheduleParams::monomial(vec![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn projection() {
        let eps = POSITIVITY_EPS;
        assert_eq!(project_positive(&[1.0, -1.0]).unwrap(), vec![1.0 + eps; 2]);
        assert_eq!(project_positive(&[0.0]).unwrap(), vec![eps]);
        assert_eq!(project_positive(&[2.0]).unwrap(), vec![4.0 + eps]);
        assert!(project_positive(&[]).is_err());
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_of(0.0), 1.0);
        assert_eq!(lambda_of(1.0), 1.0);
        assert!((lambda_of(0.5) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    fn linear_phase_integral_exact() -> f64 {
        // ∫₀¹ √(2u² − 2u + 1) du with v = u − ½: √2·∫√(v² + ¼) dv over [−½, ½].
        let a: f64 = 0.5;
        let prim = |v: f64| 0.5 * v * (v * v + a * a).sqrt() + 0.5 * a * a * (v / a).asinh();
        SQRT_2 * (prim(0.5) - prim(-0.5))
    }

    #[test]
    fn phase_integral_linear_schedule() {
        let p = mono(&[1.0]);
        assert_eq!(phase_integral(&p, 0.0).unwrap(), 0.0);
        let exact = linear_phase_integral_exact();
        let got = phase_integral(&p, 1.0).unwrap();
        assert!((got - exact).abs() < 1e-10, "{got} vs {exact}");
        assert!((got - 0.81162).abs() < 1e-5);

        let n = 1_000_000;
        let riemann: f64 = (0..n)
            .map(|k| lambda_of((k as f64 + 0.5) / n as f64))
            .sum::<f64>()
            / n as f64;
        assert!((riemann - exact).abs() < 1e-10);
    }

    #[test]
    fn phase_integral_scales_with_total_time() {
        let p = ScheduleParams::bernstein(vec![0.2, 1.0, 3.0], 50.0).unwrap();
        let q = p.with_total_time(1.0).unwrap();
        let a = phase_integral(&p, 0.7).unwrap();
        let b = phase_integral(&q, 0.7).unwrap();
        assert!((a - 50.0 * b).abs() < 1e-10);
        assert!(a > phase_integral(&p, 0.3).unwrap());
    }

    #[test]
    fn basis_table_matches_direct_evaluation() {
        let taus: Vec<f64> = (0..=50).map(|k| k as f64 / 50.0).collect();
        for basis in [Basis::Monomial, Basis::Bernstein] {
            let p = ScheduleParams::new(vec![0.5, 0.1, 2.0, 0.9, 0.3], 1.0, basis).unwrap();
            let table = BasisTable::new(basis, 5, &taus);
            let values = table.schedule_values(p.theta());
            for (tau, v) in taus.iter().zip(values) {
                assert!((p.s(*tau) - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn serde_round_trip_validates() {
        let p = ScheduleParams::bernstein(vec![0.5, 1.5], 50.0).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: ScheduleParams = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
        let bad = r#"{"theta":[-1.0],"T":50.0,"basis":"monomial"}"#;
        assert!(serde_json::from_str::<ScheduleParams>(bad).is_err());
    }

    fn params_strategy() -> impl Strategy<Value = ScheduleParams> {
        (
            prop::collection::vec(1e-6f64..5.0, 1..30),
            prop_oneof![Just(Basis::Monomial), Just(Basis::Bernstein)],
            1.0f64..100.0,
        )
            .prop_map(|(theta, basis, t)| ScheduleParams::new(theta, t, basis).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn schedule_is_nondecreasing(p in params_strategy(), mut taus in prop::collection::vec(0.0f64..=1.0, 2..40)) {
            taus.sort_by(f64::total_cmp);
            let values: Vec<f64> = taus.iter().map(|&t| p.s(t)).collect();
            for w in values.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-15);
            }
            for v in values {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn gap_never_closes(s in 0.0f64..=1.0) {
            prop_assert!(lambda_of(s) >= 0.5f64.sqrt() - 1e-15);
            prop_assert!(lambda_of(s) <= 1.0 + 1e-15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn phase_integral_is_increasing_and_bounded(p in params_strategy(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-6);
            let i_lo = phase_integral(&p, lo).unwrap();
            let i_hi = phase_integral(&p, hi).unwrap();
            prop_assert!(i_hi > i_lo);
            prop_assert!(phase_integral(&p, 1.0).unwrap() <= p.total_time() * (1.0 + 1e-12));
        }
    }
}
