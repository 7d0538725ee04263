use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// A target distribution.
///
/// Gamma uses the rate parametrization `ρ(x) = βᵅ x^{α−1} e^{−βx}/Γ(α)`;
/// mixture components are given by mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Gamma {
        alpha: f64,
        beta: f64,
    },
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<f64>,
        sigmas: Vec<f64>,
    },
    File {
        path: PathBuf,
    },
}

impl DistSpec {
    pub fn gamma(alpha: f64, beta: f64) -> Result<Self> {
        let spec = DistSpec::Gamma { alpha, beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn mixture(weights: Vec<f64>, means: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let spec = DistSpec::GaussianMixture {
            weights,
            means,
            sigmas,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `0.6·N(−10, 5) + 0.4·N(5, 5)`.
    pub fn default_mixture() -> Self {
        DistSpec::GaussianMixture {
            weights: vec![0.6, 0.4],
            means: vec![-10.0, 5.0],
            sigmas: vec![5.0, 5.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistSpec::Gamma { alpha, beta } => {
                if !(*alpha > 0.0 && *beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
                    return Err(Error::invalid(format!(
                        "gamma needs α > 0 and β > 0, got α={alpha}, β={beta}"
                    )));
                }
            }
            DistSpec::GaussianMixture {
                weights,
                means,
                sigmas,
            } => {
                if weights.is_empty() {
                    return Err(Error::invalid("mixture needs at least one component"));
                }
                if weights.len() != means.len() || weights.len() != sigmas.len() {
                    return Err(Error::invalid(format!(
                        "mixture has {} weights, {} means and {} sigmas",
                        weights.len(),
                        means.len(),
                        sigmas.len()
                    )));
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::invalid("mixture weights must be positive"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(format!(
                        "mixture weights must sum to 1, got {total}"
                    )));
                }
                if means.iter().any(|m| !m.is_finite()) || sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    return Err(Error::invalid("mixture needs finite means and positive sigmas"));
                }
            }
            DistSpec::File { .. } => {}
        }
        Ok(())
    }

    pub fn has_density(&self) -> bool {
        !matches!(self, DistSpec::File { .. })
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        match self {
            DistSpec::Gamma { alpha, beta } => Ok(statrs_gamma(*alpha, *beta).pdf(x)),
            DistSpec::GaussianMixture {
                weights,
                means,
                sigmas,
            } => Ok(weights
                .iter()
                .zip(means.iter().zip(sigmas))
                .map(|(w, (m, s))| w * statrs_normal(*m, *s).pdf(x))
                .sum()),
            DistSpec::File { path } => Err(no_density(path)),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        match self {
            DistSpec::Gamma { alpha, beta } => Ok(statrs_gamma(*alpha, *beta).cdf(x)),
            DistSpec::GaussianMixture {
                weights,
                means,
                sigmas,
            } => Ok(weights
                .iter()
                .zip(means.iter().zip(sigmas))
                .map(|(w, (m, s))| w * statrs_normal(*m, *s).cdf(x))
                .sum()),
            DistSpec::File { path } => Err(no_density(path)),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            DistSpec::Gamma { alpha, beta } => Some(alpha / beta),
            DistSpec::GaussianMixture { weights, means, .. } => {
                Some(weights.iter().zip(means).map(|(w, m)| w * m).sum())
            }
            DistSpec::File { .. } => None,
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match self {
            DistSpec::Gamma { alpha, beta } => Some(alpha / (beta * beta)),
            DistSpec::GaussianMixture {
                weights,
                means,
                sigmas,
            } => {
                let mean = self.mean()?;
                Some(
                    weights
                        .iter()
                        .zip(means.iter().zip(sigmas))
                        .map(|(w, (m, s))| w * (s * s + (m - mean).powi(2)))
                        .sum(),
                )
            }
            DistSpec::File { .. } => None,
        }
    }
}

fn statrs_gamma(alpha: f64, beta: f64) -> statrs::distribution::Gamma {
    statrs::distribution::Gamma::new(alpha, beta).expect("validated gamma parameters")
}

fn statrs_normal(mean: f64, sigma: f64) -> statrs::distribution::Normal {
    statrs::distribution::Normal::new(mean, sigma).expect("validated normal parameters")
}

fn no_density(path: &Path) -> Error {
    Error::invalid(format!(
        "sample file {} has no analytic density",
        path.display()
    ))
}

impl std::fmt::Display for DistSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            DistSpec::Gamma { alpha, beta } => write!(f, "gamma:{alpha}:{beta}"),
            DistSpec::GaussianMixture {
                weights,
                means,
                sigmas,
            } => write!(f, "mixture:{}:{}:{}", join(weights), join(means), join(sigmas)),
            DistSpec::File { path } => write!(f, "file:{}", path.display()),
        }
    }
}

/// Parses `gamma:ALPHA:BETA`, `mixture:W,…:MEAN,…:SIGMA,…`, `mixture`
/// (the default two-component mixture) or `file:PATH`.
impl FromStr for DistSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let list = |part: &str| -> Result<Vec<f64>> {
            part.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad number `{v}` in `{s}`")))
                })
                .collect()
        };
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(DistSpec::File { path: path.into() });
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["gamma", a, b] => {
                let v = list(&format!("{a},{b}"))?;
                DistSpec::gamma(v[0], v[1])
            }
            ["mixture"] => Ok(DistSpec::default_mixture()),
            ["mixture", w, m, sd] => DistSpec::mixture(list(w)?, list(m)?, list(sd)?),
            _ => Err(Error::invalid(format!(
                "cannot parse distribution `{s}` (expected gamma:A:B, mixture[:W:M:S] or file:PATH)"
            ))),
        }
    }
}

/// `n` i.i.d. draws. Gamma draws use Marsaglia–Tsang; mixture draws pick a
/// component by weight, then draw from it; file specs return the first `n`
/// values of the file.
pub fn draw_sample(spec: &DistSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    spec.validate()?;
    let mut rng = seeded(seed);
    match spec {
        DistSpec::Gamma { alpha, beta } => {
            let g = Gamma::new(*alpha, 1.0 / beta)
                .map_err(|e| Error::invalid(format!("gamma sampler: {e}")))?;
            Ok((0..n).map(|_| g.sample(&mut rng)).collect())
        }
        DistSpec::GaussianMixture {
            weights,
            means,
            sigmas,
        } => {
            let comps = means
                .iter()
                .zip(sigmas)
                .map(|(m, s)| Normal::new(*m, *s))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::invalid(format!("normal sampler: {e}")))?;
            Ok((0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut k = weights.len() - 1;
                    for (i, w) in weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            k = i;
                            break;
                        }
                    }
                    comps[k].sample(&mut rng)
                })
                .collect())
        }
        DistSpec::File { path } => {
            let data = read_sample(path)?;
            if data.len() < n {
                return Err(Error::invalid(format!(
                    "{} holds {} values, {n} requested",
                    path.display(),
                    data.len()
                )));
            }
            Ok(data[..n].to_vec())
        }
    }
}

/// One value per line; blank lines and `#` comments are skipped.
pub fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let value: f64 = text.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("not a number: `{text}`"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("non-finite value `{text}`"),
            });
        }
        out.push(value);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no values".into(),
        });
    }
    Ok(out)
}

/// Writes `# `-prefixed header lines followed by one value per line, using
/// shortest round-trip formatting.
pub fn write_sample(path: &Path, header: &[String], sample: &[f64]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for line in header {
        writeln!(w, "# {line}").map_err(io)?;
    }
    for v in sample {
        writeln!(w, "{v}").map_err(io)?;
    }
    w.flush().map_err(io)
}
