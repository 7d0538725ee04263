//! Empirical-CDF training sets, the trajectory loss and schedule fitting.

use serde::{Deserialize, Serialize};

use crate::cmaes::{Cmaes, CmaesConfig, Minimizer, StopReason};
use crate::error::{Error, Result};
use crate::evolution::{sigma_z_trajectory, EvolutionConfig, Stepper};
use crate::rng::{derive_seed, seeded};
use crate::schedule::{project_positive, Basis, BasisTable, ScheduleParams};

/// Min-max map of the sample domain onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineTransform {
    pub x_min: f64,
    pub x_max: f64,
}

impl AffineTransform {
    pub fn new(x_min: f64, x_max: f64) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::invalid(format!(
                "transform needs finite x_min < x_max, got ({x_min}, {x_max})"
            )));
        }
        Ok(Self { x_min, x_max })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn forward(&self, x: f64) -> f64 {
        (x - self.x_min) / self.width()
    }

    pub fn inverse(&self, t: f64) -> f64 {
        self.x_min + t * self.width()
    }
}

/// Min-max rescaling of `sample` onto `[0, 1]`.
pub fn rescale(sample: &[f64]) -> Result<(Vec<f64>, AffineTransform)> {
    if let Some(bad) = sample.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("sample contains non-finite value {bad}")));
    }
    let lo = sample.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::invalid("sample needs at least two distinct values"));
    }
    let tr = AffineTransform::new(lo, hi)?;
    Ok((sample.iter().map(|&x| tr.forward(x)).collect(), tr))
}

/// Labels of the empirical CDF at evolution-grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub taus: Vec<f64>,
    pub labels: Vec<f64>,
    /// Index of each τ on the evolution grid.
    pub steps: Vec<usize>,
    pub transform: AffineTransform,
    pub n_sample: usize,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

/// Empirical CDF of a normalized sample at `τⱼ = j/n_train`, `j = 1…n_train`,
/// each snapped to the nearest point of the evolution grid.
pub fn empirical_cdf(
    normalized: &[f64],
    n_train: usize,
    cfg: &EvolutionConfig,
    transform: AffineTransform,
) -> Result<TrainingSet> {
    if normalized.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    if n_train < 2 {
        return Err(Error::invalid(format!("N_train must be at least 2, got {n_train}")));
    }
    let n_steps = cfg.steps();
    if n_train > n_steps {
        return Err(Error::invalid(format!(
            "N_train = {n_train} exceeds the {n_steps} evolution steps of dτ = {}",
            cfg.dtau()
        )));
    }
    let mut sorted = normalized.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut taus = Vec::with_capacity(n_train);
    let mut labels = Vec::with_capacity(n_train);
    let mut steps = Vec::with_capacity(n_train);
    for j in 1..=n_train {
        let step = (j as f64 * n_steps as f64 / n_train as f64).round() as usize;
        let tau = step as f64 / n_steps as f64;
        let count = sorted.partition_point(|&x| x <= tau);
        taus.push(tau);
        labels.push(count as f64 / n);
        steps.push(step);
    }
    Ok(TrainingSet {
        taus,
        labels,
        steps,
        transform,
        n_sample: normalized.len(),
    })
}

/// `J = (1/N)·Σⱼ (Fⱼ − ⟨σz⟩(τⱼ))²` over the discrete trajectory.
pub fn loss(params: &ScheduleParams, ts: &TrainingSet, cfg: &EvolutionConfig) -> f64 {
    let s_mid: Vec<f64> = cfg.step_midpoints().iter().map(|&t| params.s(t)).collect();
    trajectory_loss(&sigma_z_trajectory(&s_mid, params.total_time(), cfg), ts)
}

fn trajectory_loss(z: &[f64], ts: &TrainingSet) -> f64 {
    ts.steps
        .iter()
        .zip(&ts.labels)
        .map(|(&k, &f)| (f - z[k]).powi(2))
        .sum::<f64>()
        / ts.len() as f64
}

/// Loss as a function of unconstrained raw coefficients, with the basis
/// tabulated once at the step midpoints.
pub struct LossFunction<'a> {
    table: BasisTable,
    ts: &'a TrainingSet,
    cfg: EvolutionConfig,
    total_time: f64,
}

impl<'a> LossFunction<'a> {
    pub fn new(
        ts: &'a TrainingSet,
        cfg: EvolutionConfig,
        basis: Basis,
        degree: usize,
        total_time: f64,
    ) -> Self {
        Self {
            table: BasisTable::new(basis, degree, &cfg.step_midpoints()),
            ts,
            cfg,
            total_time,
        }
    }

    pub fn eval_theta(&self, theta: &[f64]) -> f64 {
        let s_mid = self.table.schedule_values(theta);
        trajectory_loss(&sigma_z_trajectory(&s_mid, self.total_time, &self.cfg), self.ts)
    }

    pub fn eval_raw(&self, raw: &[f64]) -> f64 {
        match project_positive(raw) {
            Ok(theta) => self.eval_theta(&theta),
            Err(_) => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub degree: usize,
    pub total_time: f64,
    pub basis: Basis,
    pub population: Option<usize>,
    pub sigma0: f64,
    pub max_iters: usize,
    pub j_thresh: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            degree: 25,
            total_time: 50.0,
            basis: Basis::default(),
            population: None,
            sigma0: 0.3,
            max_iters: 10_000,
            j_thresh: 1e-5,
            seed: 0,
        }
    }
}

/// Trained schedule plus the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitResult {
    pub theta: Vec<f64>,
    pub p: usize,
    #[serde(rename = "T")]
    pub total_time: f64,
    pub basis: Basis,
    pub dtau: f64,
    pub stepper: Stepper,
    #[serde(rename = "N_train")]
    pub n_train: usize,
    pub n_sample: usize,
    #[serde(rename = "J_final")]
    pub j_final: f64,
    #[serde(rename = "J_thresh")]
    pub j_thresh: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
    pub seed: u64,
    pub population: usize,
    pub sigma0: f64,
    pub transform: AffineTransform,
    /// `(generation, J)` whenever the best loss improved.
    pub trace: Vec<(usize, f64)>,
}

impl FitResult {
    pub fn params(&self) -> Result<ScheduleParams> {
        ScheduleParams::new(self.theta.clone(), self.total_time, self.basis)
    }

    pub fn evolution_config(&self) -> Result<EvolutionConfig> {
        EvolutionConfig::new(self.dtau, self.stepper)
    }
}

/// Initial raw coefficients, i.i.d. uniform on `[0.5, 1.5]`.
pub fn initial_raw(degree: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = seeded(derive_seed(seed, &[0]));
    (0..degree).map(|_| rng.random_range(0.5..=1.5)).collect()
}

/// Fits the schedule coefficients to `ts` with CMA-ES.
pub fn fit(ts: &TrainingSet, cfg: &EvolutionConfig, opt: &FitConfig) -> Result<FitResult> {
    if opt.degree == 0 {
        return Err(Error::invalid("degree must be at least 1"));
    }
    if opt.degree > cfg.steps() {
        return Err(Error::invalid(format!(
            "degree {} exceeds the {} evolution steps",
            opt.degree,
            cfg.steps()
        )));
    }
    if !(opt.total_time > 0.0 && opt.total_time.is_finite()) {
        return Err(Error::invalid(format!("T must be positive, got {}", opt.total_time)));
    }
    let objective = LossFunction::new(ts, *cfg, opt.basis, opt.degree, opt.total_time);
    let cma = Cmaes::new(CmaesConfig {
        population: opt.population,
        sigma0: opt.sigma0,
        max_iters: opt.max_iters,
        target: opt.j_thresh,
        seed: derive_seed(opt.seed, &[1]),
        ..CmaesConfig::default()
    });
    let x0 = initial_raw(opt.degree, opt.seed);
    let min = cma.minimize(|x| objective.eval_raw(x), &x0)?;
    let theta = project_positive(&min.x)?;
    Ok(FitResult {
        p: opt.degree,
        total_time: opt.total_time,
        basis: opt.basis,
        dtau: cfg.dtau(),
        stepper: cfg.stepper(),
        n_train: ts.len(),
        n_sample: ts.n_sample,
        j_final: objective.eval_theta(&theta),
        j_thresh: opt.j_thresh,
        converged: min.stop == StopReason::Target,
        iterations: min.iterations,
        evaluations: min.evaluations,
        restarts: min.restarts,
        seed: opt.seed,
        population: opt
            .population
            .unwrap_or_else(|| crate::cmaes::default_population(opt.degree)),
        sigma0: opt.sigma0,
        transform: ts.transform,
        trace: min.trace,
        theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn unit() -> AffineTransform {
        AffineTransform::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn rescale_endpoints_and_degenerate() {
        let (v, tr) = rescale(&[0.0, 10.0]).unwrap();
        assert_eq!(v, vec![0.0, 1.0]);
        assert_eq!(tr, AffineTransform { x_min: 0.0, x_max: 10.0 });
        assert!(rescale(&[5.0, 5.0, 5.0]).is_err());
        assert!(rescale(&[]).is_err());
        assert!(rescale(&[1.0, f64::NAN]).is_err());
        assert_eq!(tr.inverse(tr.forward(3.7)), 3.7);
    }

    #[test]
    fn counting_example() {
        let ts = empirical_cdf(&[0.1, 0.5, 0.9], 2, &EvolutionConfig::default(), unit()).unwrap();
        assert_eq!(ts.taus, vec![0.5, 1.0]);
        assert_eq!(ts.labels, vec![2.0 / 3.0, 1.0]);
        assert_eq!(ts.steps, vec![250, 500]);
    }

    #[test]
    fn last_label_is_one_and_labels_monotone() {
        let mut rng = seeded(5);
        let raw: Vec<f64> = (0..1000).map(|_| rng.random::<f64>().powi(3) * 7.0 - 2.0).collect();
        let (x, tr) = rescale(&raw).unwrap();
        let ts = empirical_cdf(&x, 37, &EvolutionConfig::default(), tr).unwrap();
        assert_eq!(*ts.labels.last().unwrap(), 1.0);
        assert!(ts.labels.windows(2).all(|w| w[0] <= w[1]));
        assert!(ts.taus.windows(2).all(|w| w[0] < w[1]));
        assert!(ts.steps.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn uniform_sample_tracks_identity() {
        let mut rng = seeded(6);
        let x: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let ts = empirical_cdf(&x, 100, &EvolutionConfig::default(), unit()).unwrap();
        let worst = ts
            .taus
            .iter()
            .zip(&ts.labels)
            .map(|(t, f)| (t - f).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.01);
    }

    #[test]
    fn too_many_bins_rejected() {
        let cfg = EvolutionConfig::new(0.01, Stepper::ExactStep).unwrap();
        assert!(empirical_cdf(&[0.0, 1.0], 101, &cfg, unit()).is_err());
        assert!(empirical_cdf(&[0.0, 1.0], 100, &cfg, unit()).is_ok());
        assert!(empirical_cdf(&[0.0, 1.0], 1, &cfg, unit()).is_err());
    }

    #[test]
    fn loss_trivial_values() {
        let cfg = EvolutionConfig::default();
        let params = ScheduleParams::monomial(vec![1.0], 50.0).unwrap();
        let ts = TrainingSet {
            taus: vec![0.0, 0.0],
            labels: vec![1.0, 1.0],
            steps: vec![0, 0],
            transform: unit(),
            n_sample: 2,
        };
        // ⟨σz⟩ = 0 at τ = 0.
        assert!((loss(&params, &ts, &cfg) - 1.0).abs() < 1e-15);

        let mut ts = empirical_cdf(&[0.2, 0.8], 10, &cfg, unit()).unwrap();
        let s_mid: Vec<f64> = cfg.step_midpoints().iter().map(|&t| params.s(t)).collect();
        let z = sigma_z_trajectory(&s_mid, 50.0, &cfg);
        ts.labels = ts.steps.iter().map(|&k| z[k]).collect();
        assert_eq!(loss(&params, &ts, &cfg), 0.0);
    }

    #[test]
    fn tabulated_loss_matches_direct() {
        let cfg = EvolutionConfig::default();
        let ts = empirical_cdf(&[0.1, 0.3, 0.35, 0.9], 20, &cfg, unit()).unwrap();
        for basis in [Basis::Monomial, Basis::Bernstein] {
            let theta = vec![0.4, 1.3, 0.9];
            let params = ScheduleParams::new(theta.clone(), 30.0, basis).unwrap();
            let f = LossFunction::new(&ts, cfg, basis, 3, 30.0);
            assert!((f.eval_theta(&theta) - loss(&params, &ts, &cfg)).abs() < 1e-14);
        }
    }

    #[test]
    fn self_consistent_fit() {
        let cfg = EvolutionConfig::new(0.01, Stepper::ExactStep).unwrap();
        let truth = ScheduleParams::bernstein(vec![0.6, 1.4, 0.9], 50.0).unwrap();
        let s_mid: Vec<f64> = cfg.step_midpoints().iter().map(|&t| truth.s(t)).collect();
        let z = sigma_z_trajectory(&s_mid, 50.0, &cfg);
        let mut ts = empirical_cdf(&[0.0, 1.0], 50, &cfg, unit()).unwrap();
        ts.labels = ts.steps.iter().map(|&k| z[k]).collect();
        let opt = FitConfig {
            degree: 3,
            j_thresh: 1e-10,
            seed: 4,
            ..FitConfig::default()
        };
        let res = fit(&ts, &cfg, &opt).unwrap();
        assert!(res.j_final <= 1e-8, "{res:?}");
        assert!(res.converged);
        let fitted = res.params().unwrap();
        let fs: Vec<f64> = cfg.step_midpoints().iter().map(|&t| fitted.s(t)).collect();
        let zf = sigma_z_trajectory(&fs, 50.0, &cfg);
        assert!(z.iter().zip(&zf).all(|(a, b)| (a - b).abs() < 1e-3));
    }

    #[test]
    fn fit_is_deterministic_and_serializes() {
        let cfg = EvolutionConfig::new(0.01, Stepper::ExactStep).unwrap();
        let mut rng = seeded(8);
        let x: Vec<f64> = (0..500).map(|_| rng.random::<f64>().sqrt()).collect();
        let (x, tr) = rescale(&x).unwrap();
        let ts = empirical_cdf(&x, 20, &cfg, tr).unwrap();
        let opt = FitConfig {
            degree: 4,
            max_iters: 60,
            j_thresh: 0.0,
            seed: 12,
            ..FitConfig::default()
        };
        let a = fit(&ts, &cfg, &opt).unwrap();
        let b = fit(&ts, &cfg, &opt).unwrap();
        assert_eq!(a, b);
        assert!(!a.converged);
        let json = serde_json::to_string(&a).unwrap();
        let back: FitResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        for key in ["\"theta\"", "\"p\"", "\"T\"", "\"dtau\"", "\"N_train\"", "\"J_final\"", "\"transform\""] {
            assert!(json.contains(key), "{key}");
        }
    }

    #[test]
    fn fit_rejects_degree_above_step_count() {
        let cfg = EvolutionConfig::new(0.1, Stepper::ExactStep).unwrap();
        let ts = empirical_cdf(&[0.0, 1.0], 5, &cfg, unit()).unwrap();
        let opt = FitConfig {
            degree: 11,
            ..FitConfig::default()
        };
        assert!(fit(&ts, &cfg, &opt).is_err());
    }
}
