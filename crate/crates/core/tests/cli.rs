use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use meanrev_futures::{futures_price, SpotModel};

fn meanrev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meanrev")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn error_line(out: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&out.stderr);
    let line = err.lines().last().expect("stderr has an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON ({e}): {line}"))
}

const CIR: [&str; 12] =
    ["--kind", "cir", "--mu", "8.57", "--theta", "17.58", "--mu-q", "4.55", "--theta-q", "18.16", "--sigma", "5.33"];

#[test]
fn price_prints_the_closed_form_value() {
    let mut args = vec!["price", "--t", "0", "--s", "12.12", "--T", "27d"];
    args.extend(CIR);
    let out = meanrev(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let printed: f64 = stdout(&out).trim().parse().unwrap();
    let model = SpotModel::cir(8.57, 17.58, 4.55, 18.16, 5.33);
    assert_eq!(printed, futures_price(&model, 0.0, 12.12, 27.0 / 252.0).unwrap());
    assert!((printed - 14.45).abs() < 0.01);
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(meanrev(&["--help"]).status.code(), Some(0));
    assert_eq!(meanrev(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_with_code_2() {
    let out = meanrev(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["code"], 2);

    let out = meanrev(&["price", "--s", "10", "--T", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "config");
}

#[test]
fn missing_quotes_file_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let mut args = vec!["calibrate", "--s0", "12", "--quotes", missing.to_str().unwrap()];
    args.extend(CIR);
    let out = meanrev(&args);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn feller_violation_fails_validation_with_code_3() {
    let mut args = vec!["validate"];
    args.extend(&CIR[..10]);
    args.extend(["--sigma", "30"]);
    let out = meanrev(&args);
    assert_eq!(out.status.code(), Some(3));
    let err = error_line(&out);
    assert_eq!(err["error"], "validation");
    assert!(err["message"].as_str().unwrap().contains("feller"), "{err}");
}

#[test]
fn valid_parameters_pass_validation() {
    let out = meanrev(&["validate", "--config", config("cir.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["status"], "ok");
}

#[test]
fn solver_non_convergence_exits_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    let base = std::fs::read_to_string(config("cir.toml")).unwrap();
    let text = base
        .replace("n_space = 500", "n_space = 100\nmax_iter = 1\nepsilon = 1e-14")
        .replace("n_time = 500", "n_time = 100");
    std::fs::write(&cfg, text).unwrap();
    let out = meanrev(&["boundaries", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_line(&out)["error"], "numerics");
}

/// Header and rows; empty cells read as `None`, text cells as NaN.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(|c| (!c.is_empty()).then(|| c.parse().unwrap_or(f64::NAN))).collect())
        .collect();
    (header, rows)
}

#[test]
fn boundaries_file_satisfies_the_ordering_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let out = meanrev(&[
        "boundaries",
        "--config",
        config("cir.toml").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv_path = dir.path().join("boundaries.csv");
    let (header, rows) = read_csv(&csv_path);
    assert_eq!(
        header,
        ["time", "long_entry", "long_exit", "short_entry", "short_exit", "chooser_long", "chooser_short"]
    );
    assert_eq!(rows.len(), 500);
    let slack = 1e-4 * (4.0 * 18.16) / 500.0;
    let mut checked = 0;
    for row in &rows {
        let pairs = [(row[1], row[2]), (row[4], row[3]), (row[5], row[1]), (row[3], row[6])];
        for (lo, hi) in pairs {
            if let (Some(lo), Some(hi)) = (lo, hi) {
                assert!(lo <= hi + slack, "t={:?}: {lo} > {hi}", row[0]);
                checked += 1;
            }
        }
    }
    assert!(checked > 1000, "only {checked} comparisons");

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("boundaries.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["subcommand"], "boundaries");
    assert_eq!(meta["seed"], 42);
    assert!(chrono::DateTime::parse_from_rfc3339(meta["created"].as_str().unwrap()).is_ok(), "{meta}");
}

#[test]
fn simulate_is_deterministic_for_a_seed() {
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config("xou.toml");
        let args =
            ["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap(), "--seed", seed];
        let out = meanrev(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.path().join("paths.csv")).unwrap()
    };
    let a = run("7");
    assert_eq!(a, run("7"));
    assert_ne!(a, run("8"));
}

#[test]
fn curve_then_calibrate_recovers_the_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let mut args = vec!["curve", "--s0", "12.12", "--out-dir", d];
    args.extend(CIR);
    assert_eq!(meanrev(&args).status.code(), Some(0));

    let (header, rows) = read_csv(&dir.path().join("curve.csv"));
    assert_eq!(header[..3], ["maturity_days", "maturity_years", "price"]);
    let quotes = dir.path().join("quotes.csv");
    let mut text = String::from("maturity,price\n");
    for row in &rows {
        text.push_str(&format!("{},{}\n", row[1].unwrap(), row[2].unwrap()));
    }
    std::fs::write(&quotes, text).unwrap();

    let out =
        meanrev(&["calibrate", "--kind", "cir", "--s0", "12.12", "--quotes", quotes.to_str().unwrap(), "--out-dir", d]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("calibration.json")).unwrap()).unwrap();
    let mu_q = fit["params"]["mu_q"].as_f64().unwrap();
    let theta_q = fit["params"]["theta_q"].as_f64().unwrap();
    assert!((mu_q - 4.55).abs() < 1e-3 && (theta_q - 18.16).abs() < 1e-3, "{fit}");
    let fragment = std::fs::read_to_string(dir.path().join("calibration.toml")).unwrap();
    let parsed: toml::Table = toml::from_str(&fragment).unwrap();
    assert_eq!(parsed["model"]["kind"].as_str(), Some("cir"));
}

#[test]
fn rollyield_writes_per_path_decompositions_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("cir.toml");
    let args =
        ["rollyield", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap(), "--n-paths", "50"];
    let out = meanrev(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let (header, rows) = read_csv(&dir.path().join("rollyield_paths.csv"));
    assert_eq!(header, ["path_id", "time", "basis_return", "roll_adjustment", "total"]);
    assert_eq!(rows.len(), 50 * 3);
    for row in &rows {
        assert_eq!(row[4].unwrap(), row[2].unwrap() + row[3].unwrap());
    }

    let (header, summary) = read_csv(&dir.path().join("rollyield.csv"));
    assert_eq!(header, ["time", "expected", "mc_mean", "mc_std_err"]);
    for (k, row) in summary.iter().enumerate() {
        let totals: Vec<f64> = rows.iter().skip(k).step_by(3).map(|r| r[4].unwrap()).collect();
        let mean = totals.iter().sum::<f64>() / totals.len() as f64;
        assert!((row[2].unwrap() - mean).abs() < 1e-12 * (1.0 + mean.abs()));
    }
}
