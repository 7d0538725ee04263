use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adiabatic-pdf"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Data rows of a table as `(header, rows)`, fields kept as text.
fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let body = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, body)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, body) = rows(path);
    let k = header.iter().position(|h| h == name).unwrap();
    body.iter().map(|r| r[k].parse().unwrap()).collect()
}

/// A small Gamma sample plus a quick fit of it.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        ok(
            dir.path(),
            &["sample", "--dist", "gamma:10:0.5", "--n", "5000", "--seed", "3", "--out", "s.txt"],
        );
        let out = run(
            dir.path(),
            &["fit", "--sample", "s.txt", "--degree", "10", "--ntrain", "40", "--seed", "3", "--out", "f.json"],
        );
        assert!(matches!(code(&out), 0 | 3), "{}", String::from_utf8_lossy(&out.stderr));
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn sample_is_deterministic_and_documented() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.txt", "b.txt"] {
        ok(dir.path(), &["sample", "--n", "1000", "--seed", "7", "--out", name]);
    }
    let a = std::fs::read(dir.path().join("a.txt")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.txt")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# dist = gamma:10:0.5\n# n = 1000\n# seed = 7\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1000);
}

#[test]
fn empty_sample_request_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["sample", "--n", "0", "--out", "z.txt"]);
    assert_eq!(code(&out), 1);
    assert!(!dir.path().join("z.txt").exists());
}

#[test]
fn help_and_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["--help"])), 0);
    assert_eq!(code(&run(dir.path(), &["fit", "--bogus"])), 1);
    assert_eq!(code(&run(dir.path(), &["sample", "--out", "x", "--mode", "fast"])), 1);
}

#[test]
fn config_file_is_validated_and_overridden() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "degre = 3\n").unwrap();
    let out = run(dir.path(), &["--config", "bad.toml", "sample", "--out", "x.txt"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("degre"));

    std::fs::write(dir.path().join("c.toml"), "n_sample = 10\nseed = 1\n").unwrap();
    ok(dir.path(), &["--config", "c.toml", "sample", "--out", "a.txt"]);
    ok(dir.path(), &["--config", "c.toml", "sample", "--n", "20", "--out", "b.txt"]);
    let count = |f: &str| {
        std::fs::read_to_string(dir.path().join(f))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .count()
    };
    assert_eq!((count("a.txt"), count("b.txt")), (10, 20));
}

#[test]
fn fit_is_reproducible_and_complete() {
    let fx = Fixture::new();
    let out = run(
        fx.dir.path(),
        &["fit", "--sample", "s.txt", "--degree", "10", "--ntrain", "40", "--seed", "3", "--out", "g.json"],
    );
    assert!(matches!(code(&out), 0 | 3));
    let a = std::fs::read(fx.path("f.json")).unwrap();
    assert_eq!(a, std::fs::read(fx.path("g.json")).unwrap());
    let json: serde_json::Value = serde_json::from_slice(&a).unwrap();
    for key in ["theta", "p", "T", "dtau", "N_train", "J_final", "iterations", "seed", "transform"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(json["theta"].as_array().unwrap().len(), 10);
    assert!(json["transform"]["x_min"].is_f64() && json["transform"]["x_max"].is_f64());
}

#[test]
fn fit_exit_codes() {
    let fx = Fixture::new();
    let d = fx.dir.path();
    // More coefficients than evolution steps.
    let out = run(d, &["fit", "--sample", "s.txt", "--dtau", "0.1", "--degree", "25", "--out", "x.json"]);
    assert_eq!(code(&out), 1);

    std::fs::write(fx.path("bad.txt"), "# h\n1.0\n2.0\nnope\n").unwrap();
    let out = run(d, &["fit", "--sample", "bad.txt", "--out", "x.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains(":4:"));

    std::fs::write(fx.path("const.txt"), "1.0\n1.0\n").unwrap();
    assert_eq!(code(&run(d, &["fit", "--sample", "const.txt", "--out", "x.json"])), 2);
    assert_eq!(code(&run(d, &["fit", "--sample", "missing.txt", "--out", "x.json"])), 2);

    let out = run(
        d,
        &["fit", "--sample", "s.txt", "--degree", "4", "--max-iters", "2", "--j-thresh", "0", "--out", "n.json"],
    );
    assert_eq!(code(&out), 3);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(fx.path("n.json")).unwrap()).unwrap();
    assert_eq!(json["converged"], false);
}

#[test]
fn trajectory_export() {
    let fx = Fixture::new();
    let out = run(
        fx.dir.path(),
        &["fit", "--sample", "s.txt", "--degree", "4", "--max-iters", "3", "--out", "t.json", "--trajectory", "traj.csv"],
    );
    assert!(matches!(code(&out), 0 | 3));
    let text = std::fs::read_to_string(fx.path("traj.csv")).unwrap();
    assert!(text.starts_with("tau,re0,im0,re1,im1,sigma_z\n"));
    assert_eq!(text.lines().count(), 502);
}

#[test]
fn eval_cdf_boundaries_and_columns() {
    let fx = Fixture::new();
    ok(fx.dir.path(), &["eval", "--fit", "f.json", "--what", "cdf", "--out", "c.csv"]);
    let (header, body) = rows(&fx.path("c.csv"));
    assert_eq!(header, ["x", "t", "value", "std"]);
    assert_eq!(body.len(), 500);
    assert!(body.iter().all(|r| r[3].is_empty()));
    let v = column(&fx.path("c.csv"), "value");
    assert!(v[0].abs() < 1e-9);
    assert!((v[499] - 1.0).abs() < 1e-2);
    let x = column(&fx.path("c.csv"), "x");
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(fx.path("f.json")).unwrap()).unwrap();
    assert_eq!(x[0], json["transform"]["x_min"].as_f64().unwrap());
    assert_eq!(x[499], json["transform"]["x_max"].as_f64().unwrap());
}

#[test]
fn eval_rejects_grid_outside_unit_interval() {
    let fx = Fixture::new();
    let out = run(fx.dir.path(), &["eval", "--fit", "f.json", "--what", "cdf", "--grid", "0:1.5:10", "--out", "c.csv"]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&run(fx.dir.path(), &["eval", "--fit", "s.txt", "--what", "cdf", "--out", "c.csv"])), 2);
}

#[test]
fn eval_pdf_is_nonnegative_and_normalized() {
    let fx = Fixture::new();
    ok(fx.dir.path(), &["eval", "--fit", "f.json", "--what", "pdf", "--grid", "2001", "--out", "p.csv"]);
    let x = column(&fx.path("p.csv"), "x");
    let v = column(&fx.path("p.csv"), "value");
    assert!(v.iter().all(|&d| d >= 0.0));
    let integral: f64 = x.windows(2).zip(v.windows(2)).map(|(x, v)| 0.5 * (v[0] + v[1]) * (x[1] - x[0])).sum();
    assert!((integral - 1.0).abs() < 2e-2, "{integral}");
}

#[test]
fn shot_noise_scales_with_shots() {
    let fx = Fixture::new();
    let d = fx.dir.path();
    for (n, name) in [("20000", "a.csv"), ("200000", "b.csv")] {
        ok(d, &["eval", "--fit", "f.json", "--what", "cdf", "--mode", "shots", "--shots", n, "--grid", "0.2:0.8:40", "--out", name]);
    }
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let ratio = mean(column(&fx.path("a.csv"), "std")) / mean(column(&fx.path("b.csv"), "std"));
    assert!((ratio - 10f64.sqrt()).abs() < 0.5, "{ratio}");
    ok(d, &["eval", "--fit", "f.json", "--what", "cdf", "--mode", "shots", "--shots", "20000", "--grid", "0.2:0.8:40", "--out", "c.csv"]);
    assert_eq!(std::fs::read(fx.path("a.csv")).unwrap(), std::fs::read(fx.path("c.csv")).unwrap());
}

#[test]
fn metrics_against_itself_and_truth() {
    let fx = Fixture::new();
    let d = fx.dir.path();
    ok(d, &["eval", "--fit", "f.json", "--what", "pdf", "--out", "p.csv"]);
    ok(d, &["metrics", "--eval", "p.csv", "--truth", "csv:p.csv", "--out", "self.json"]);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(fx.path("self.json")).unwrap()).unwrap();
    assert_eq!(m["mse_pdf"], 0.0);
    assert_eq!(m["kl_pdf"], 0.0);
    assert!(m["mse_cdf"].is_null());

    ok(d, &["metrics", "--eval", "p.csv", "--truth", "gamma:10:0.5", "--out", "m.json"]);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(fx.path("m.json")).unwrap()).unwrap();
    assert!(m["mse_pdf"].as_f64().unwrap() < 5e-2);
    ok(d, &["metrics", "--eval", "p.csv", "--truth", "file:s.txt", "--out", "h.json"]);

    ok(d, &["eval", "--fit", "f.json", "--what", "cdf", "--out", "c.csv"]);
    ok(d, &["metrics", "--eval", "c.csv", "--truth", "gamma:10:0.5", "--out", "mc.json"]);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(fx.path("mc.json")).unwrap()).unwrap();
    assert!(m["mse_cdf"].as_f64().unwrap() < 1e-3);
    assert_eq!(code(&run(d, &["metrics", "--eval", "c.csv", "--truth", "csv:p.csv", "--out", "x.json"])), 2);
}

#[test]
fn metrics_reject_shuffled_and_mismatched_grids() {
    let fx = Fixture::new();
    let d = fx.dir.path();
    ok(d, &["eval", "--fit", "f.json", "--what", "pdf", "--grid", "50", "--out", "p.csv"]);
    let text = std::fs::read_to_string(fx.path("p.csv")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let n = lines.len();
    lines.swap(n - 1, n - 5);
    std::fs::write(fx.path("shuffled.csv"), lines.join("\n") + "\n").unwrap();
    let out = run(d, &["metrics", "--eval", "shuffled.csv", "--truth", "gamma:10:0.5", "--out", "m.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid mismatch"));

    ok(d, &["eval", "--fit", "f.json", "--what", "pdf", "--grid", "60", "--out", "q.csv"]);
    let out = run(d, &["metrics", "--eval", "p.csv", "--truth", "csv:q.csv", "--out", "m.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn kde_records_bandwidth_and_is_deterministic() {
    let fx = Fixture::new();
    let d = fx.dir.path();
    for name in ["k1.csv", "k2.csv"] {
        ok(d, &["kde", "--sample", "s.txt", "--out", name]);
    }
    let a = std::fs::read_to_string(fx.path("k1.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(fx.path("k2.csv")).unwrap());
    assert!(a.lines().any(|l| l.starts_with("# bandwidth = ")));
    let (header, _) = rows(&fx.path("k1.csv"));
    assert_eq!(header, ["x", "t", "density"]);
    ok(d, &["metrics", "--eval", "k1.csv", "--truth", "gamma:10:0.5", "--out", "m.json"]);
}

#[test]
fn top_hat_on_tiny_sample_is_piecewise_constant() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.txt"), "0\n0.1\n0.3\n0.5\n0.8\n1\n").unwrap();
    ok(
        dir.path(),
        &["kde", "--sample", "tiny.txt", "--kernel", "top-hat", "--grid", "1001", "--out", "k.csv"],
    );
    let v = column(&dir.path().join("k.csv"), "density");
    let levels = {
        let mut l: Vec<f64> = v.clone();
        l.sort_by(f64::total_cmp);
        l.dedup();
        l
    };
    // Six boxes overlap at most six deep and have twelve edges.
    assert!(levels.len() <= 7, "{levels:?}");
    let jumps = v.windows(2).filter(|w| w[0] != w[1]).count();
    assert!(jumps <= 12, "{jumps}");
}

#[test]
fn angles_table() {
    let fx = Fixture::new();
    ok(fx.dir.path(), &["angles", "--fit", "f.json", "--grid", "0.1:0.9:9", "--out", "a.csv"]);
    let (header, body) = rows(&fx.path("a.csv"));
    assert_eq!(header, ["t", "phi", "theta", "psi"]);
    assert_eq!(body.len(), 9);
}
