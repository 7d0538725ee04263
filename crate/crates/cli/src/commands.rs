use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use adiabatic_pdf::analysis::{
    draw_sample, histogram_density, kde_bandwidth_search, kde_estimate, kl_divergence, mse, read_sample,
    write_sample, DistSpec, MetricReport, HEP_BINS,
};
use adiabatic_pdf::circuit::{angles_at, cdf_at, Mode};
use adiabatic_pdf::derivative::pdf_on_grid;
use adiabatic_pdf::evolution::{evolve, EvolutionConfig};
use adiabatic_pdf::rng::derive_seed;
use adiabatic_pdf::training::{empirical_cdf, fit as train, rescale, FitConfig, FitResult};

use crate::config::Settings;
use crate::error::{data, CliError};
use crate::table::{fmt_f64, Table};
use crate::Quantity;

/// Exit code for a fit that stopped before reaching `J_thresh`.
const NOT_CONVERGED: u8 = 3;

/// Two grids match when their `t` columns agree to this tolerance.
const GRID_TOL: f64 = 1e-12;

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_fit(path: &Path) -> Result<FitResult, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn sample(s: &Settings, out: &Path) -> Result<ExitCode, CliError> {
    let values = draw_sample(&s.dist, s.n_sample, s.seed).map_err(|e| match e {
        adiabatic_pdf::Error::InvalidArgument(_) => CliError::Core(e),
        other => data(other),
    })?;
    let header = vec![
        format!("dist = {}", s.dist),
        format!("n = {}", values.len()),
        format!("seed = {}", s.seed),
    ];
    write_sample(out, &header, &values).map_err(data)?;
    Ok(ExitCode::SUCCESS)
}

pub fn fit(s: &Settings, sample: &Path, out: &Path, trajectory: Option<&Path>) -> Result<ExitCode, CliError> {
    let evo = EvolutionConfig::new(s.dtau, s.stepper)?;
    if s.degree > evo.steps() {
        return Err(CliError::Usage(format!(
            "degree {} exceeds the {} evolution steps",
            s.degree,
            evo.steps()
        )));
    }
    let values = read_sample(sample).map_err(data)?;
    let (normalized, transform) = rescale(&values).map_err(data)?;
    let ts = empirical_cdf(&normalized, s.ntrain, &evo, transform)?;
    let opt = FitConfig {
        degree: s.degree,
        total_time: s.total_time,
        basis: s.basis,
        population: s.population,
        sigma0: s.sigma0,
        max_iters: s.max_iters,
        j_thresh: s.j_thresh,
        seed: s.seed,
    };
    let result = train(&ts, &evo, &opt).map_err(|e| match e {
        adiabatic_pdf::Error::InvalidArgument(_) => CliError::Core(e),
        other => data(other),
    })?;
    let mut json = serde_json::to_string_pretty(&result).expect("fit result serializes");
    json.push('\n');
    write_text(out, &json)?;
    if let Some(path) = trajectory {
        let traj = evolve(&result.params()?, &evo);
        let file = File::create(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        traj.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    if result.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "warning: J = {:e} did not reach J_thresh = {:e} within {} iterations",
            result.j_final, result.j_thresh, result.iterations
        );
        Ok(ExitCode::from(NOT_CONVERGED))
    }
}

fn mode_meta(table: Table, mode: Mode) -> Table {
    match mode {
        Mode::Exact => table.with_meta("mode", "exact"),
        Mode::Shots { n_shots, repeats } => table
            .with_meta("mode", "shots")
            .with_meta("shots", n_shots)
            .with_meta("repeats", repeats),
    }
}

pub fn eval(s: &Settings, fit_path: &Path, what: Quantity, out: &Path) -> Result<ExitCode, CliError> {
    let result = load_fit(fit_path)?;
    let params = result.params().map_err(data)?;
    let tr = result.transform;
    let taus = s.grid.points();
    let exact = s.mode == Mode::Exact;
    let mut table = Table::new(&["x", "t", "value", "std"]).with_meta(
        "quantity",
        match what {
            Quantity::Cdf => "cdf",
            Quantity::Pdf => "pdf",
        },
    );
    table = mode_meta(table, s.mode)
        .with_meta("seed", s.seed)
        .with_meta("x_min", fmt_f64(tr.x_min))
        .with_meta("x_max", fmt_f64(tr.x_max));
    match what {
        Quantity::Cdf => {
            for (j, &t) in taus.iter().enumerate() {
                let est = cdf_at(&params, t, s.mode, derive_seed(s.seed, &[j as u64]))?;
                let std = (!exact).then_some(est.std);
                table.rows.push(vec![Some(tr.inverse(t)), Some(t), Some(est.mean), std]);
            }
        }
        Quantity::Pdf => {
            let points = pdf_on_grid(&params, &taus, s.mode, s.seed, &tr)?;
            let negative = points.iter().filter(|p| p.negative).count();
            if negative > 0 {
                eprintln!("warning: {negative} of {} density values are negative", points.len());
            }
            table = table.with_meta("units", "per unit x").with_meta("negative", negative);
            for p in &points {
                let std = (!exact).then(|| p.uncertainty / tr.width());
                table.rows.push(vec![Some(p.x), Some(p.t), Some(p.rho_x), std]);
            }
        }
    }
    table.write(out)?;
    Ok(ExitCode::SUCCESS)
}

pub fn angles(s: &Settings, fit_path: &Path, out: &Path) -> Result<ExitCode, CliError> {
    let result = load_fit(fit_path)?;
    let params = result.params().map_err(data)?;
    let mut table = Table::new(&["t", "phi", "theta", "psi"]);
    for t in s.grid.points() {
        let a = angles_at(&params, t)?;
        table.rows.push(vec![Some(t), Some(a.phi), Some(a.theta), Some(a.psi)]);
    }
    table.write(out)?;
    Ok(ExitCode::SUCCESS)
}

pub fn kde(s: &Settings, sample: &Path, out: &Path) -> Result<ExitCode, CliError> {
    let values = read_sample(sample).map_err(data)?;
    let (normalized, tr) = rescale(&values).map_err(data)?;
    let search = kde_bandwidth_search(
        &normalized,
        s.kernel,
        s.bandwidth_range,
        s.bandwidth_candidates,
        s.folds,
        s.seed,
    )?;
    let taus = s.grid.points();
    let density = kde_estimate(&normalized, s.kernel, search.bandwidth, &taus)?;
    let mut table = Table::new(&["x", "t", "density"])
        .with_meta("quantity", "pdf")
        .with_meta("mode", format!("kde-{}", s.kernel))
        .with_meta("kernel", s.kernel)
        .with_meta("bandwidth", fmt_f64(search.bandwidth))
        .with_meta("bandwidth_units", "t")
        .with_meta("log_likelihood", fmt_f64(search.log_likelihood))
        .with_meta("seed", s.seed)
        .with_meta("x_min", fmt_f64(tr.x_min))
        .with_meta("x_max", fmt_f64(tr.x_max))
        .with_meta("units", "per unit x");
    for (&t, &d) in taus.iter().zip(&density) {
        table.rows.push(vec![Some(tr.inverse(t)), Some(t), Some(d / tr.width())]);
    }
    table.write(out)?;
    eprintln!("bandwidth = {} (kernel {})", fmt_f64(search.bandwidth), s.kernel);
    Ok(ExitCode::SUCCESS)
}

/// The quantity column of a table: `value` (eval) or `density` (kde).
fn values_of(table: &Table, path: &Path) -> Result<Vec<f64>, CliError> {
    if table.header.iter().any(|h| h == "value") {
        table.column(path, "value")
    } else {
        table.column(path, "density")
    }
}

struct Prediction {
    quantity: String,
    mode: String,
    t: Vec<f64>,
    x: Vec<f64>,
    values: Vec<f64>,
    width: f64,
}

fn read_prediction(path: &Path) -> Result<Prediction, CliError> {
    let table = Table::read(path)?;
    let quantity = table
        .meta("quantity")
        .ok_or_else(|| CliError::Data(format!("{}: missing `# quantity` header", path.display())))?
        .to_string();
    if quantity != "cdf" && quantity != "pdf" {
        return Err(CliError::Data(format!("{}: unknown quantity `{quantity}`", path.display())));
    }
    let width = table.meta_f64(path, "x_max")? - table.meta_f64(path, "x_min")?;
    let t = table.column(path, "t")?;
    if t.is_empty() {
        return Err(CliError::Data(format!("{}: no rows", path.display())));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Data(format!(
            "{}: grid mismatch: t is not strictly increasing",
            path.display()
        )));
    }
    Ok(Prediction {
        mode: table.meta("mode").unwrap_or("unknown").to_string(),
        x: table.column(path, "x")?,
        values: values_of(&table, path)?,
        quantity,
        t,
        width,
    })
}

/// Truth values on the prediction grid, in the prediction's units.
fn truth_values(pred: &Prediction, truth: &str) -> Result<Vec<f64>, CliError> {
    let pdf = pred.quantity == "pdf";
    if let Some(path) = truth.strip_prefix("csv:") {
        let other = read_prediction(Path::new(path))?;
        if other.quantity != pred.quantity {
            return Err(CliError::Data(format!(
                "{path}: holds a {} table, expected {}",
                other.quantity, pred.quantity
            )));
        }
        let same_grid = other.t.len() == pred.t.len()
            && other.t.iter().zip(&pred.t).all(|(a, b)| (a - b).abs() <= GRID_TOL);
        if !same_grid {
            return Err(CliError::Data(format!("{path}: grid mismatch")));
        }
        if (other.width - pred.width).abs() > GRID_TOL * pred.width.abs().max(1.0) {
            return Err(CliError::Data(format!("{path}: different x range")));
        }
        return Ok(other.values);
    }
    let spec: DistSpec = truth.parse().map_err(|e| CliError::Usage(format!("truth: {e}")))?;
    if spec.has_density() {
        return pred
            .x
            .iter()
            .map(|&x| if pdf { spec.pdf(x) } else { spec.cdf(x) })
            .collect::<adiabatic_pdf::Result<_>>()
            .map_err(CliError::Core);
    }
    let DistSpec::File { path } = &spec else {
        unreachable!("only file specs lack a density")
    };
    let mut sample = read_sample(path).map_err(data)?;
    if pdf {
        let lo = pred.x[0] - pred.t[0] * pred.width;
        let hi = lo + pred.width;
        let (_, dens) = histogram_density(&sample, HEP_BINS, lo, hi).map_err(data)?;
        Ok(pred
            .t
            .iter()
            .map(|&t| dens[((t * HEP_BINS as f64) as usize).min(HEP_BINS - 1)])
            .collect())
    } else {
        sample.sort_by(f64::total_cmp);
        let n = sample.len() as f64;
        Ok(pred
            .x
            .iter()
            .map(|&x| sample.partition_point(|&v| v <= x) as f64 / n)
            .collect())
    }
}

pub fn metrics(eval_path: &Path, truth: &str, out: &Path) -> Result<ExitCode, CliError> {
    let pred = read_prediction(eval_path)?;
    let target = truth_values(&pred, truth)?;
    let pdf = pred.quantity == "pdf";
    // Densities are compared per unit t; tables and truths are per unit x.
    let scale = if pdf { pred.width } else { 1.0 };
    let p: Vec<f64> = pred.values.iter().map(|v| v * scale).collect();
    let q: Vec<f64> = target.iter().map(|v| v * scale).collect();
    let report = MetricReport {
        mse_cdf: (!pdf).then(|| mse(&p, &q)).transpose()?,
        mse_pdf: pdf.then(|| mse(&p, &q)).transpose()?,
        kl_pdf: pdf.then(|| kl_divergence(&p, &q)).transpose()?,
        n_points: p.len(),
        t_min: pred.t[0],
        t_max: pred.t[pred.t.len() - 1],
        mode: pred.mode.clone(),
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_text(out, &json)?;
    Ok(ExitCode::SUCCESS)
}
