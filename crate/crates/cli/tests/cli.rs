use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn selfsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SELFSIM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// `(s, beta, t, alpha) -> (value, method)` rows of a limit-cov table.
fn limit_rows(path: &Path) -> Vec<([f64; 4], f64, String)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,beta,t,alpha,value,method"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let n = |i: usize| f[i].parse::<f64>().unwrap();
            ([n(0), n(1), n(2), n(3)], n(4), f[5].to_string())
        })
        .collect()
}

#[test]
fn simulate_writes_one_row_per_path_and_time() {
    let dir = tempfile::tempdir().unwrap();
    let o = selfsim(
        &[
            "simulate", "--family", "fbm", "--r", "1.0", "--T", "2", "--paths", "100", "--seed", "7",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("path_id,t,value"));
    assert_eq!(lines.count(), 100 * 33);
    let side = read_json(&dir.path().join("paths.json"));
    assert_eq!(side["seed"], 7);
    assert_eq!(side["config"]["process"]["family"], "fbm");
    assert_eq!(side["config"]["grid"]["T"], 2.0);
    assert!(side["version"].is_string());
}

#[test]
fn stable_index_outside_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = selfsim(&["simulate", "--family", "stable", "--r", "2.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("(0, 2)"), "{}", stderr(&o));
    assert!(!dir.path().join("paths.csv").exists());
}

#[test]
fn reruns_are_byte_identical_for_any_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--family", "stable", "--r", "1.5", "--paths", "64", "--seed", "11",
    ];
    let mut one = args.to_vec();
    one.extend(["--workers", "1"]);
    let mut four = args.to_vec();
    four.extend(["--workers", "4"]);
    assert!(selfsim(&one, a.path()).status.success());
    assert!(selfsim(&four, b.path()).status.success());
    let csv = |d: &Path| std::fs::read(d.join("paths.csv")).unwrap();
    assert_eq!(csv(a.path()), csv(b.path()));

    // The sidecar echoes the output directory, so compare reruns in place.
    let c = tempfile::tempdir().unwrap();
    assert!(selfsim(&args, c.path()).status.success());
    let first = (csv(c.path()), std::fs::read(c.path().join("paths.json")).unwrap());
    assert!(selfsim(&args, c.path()).status.success());
    assert_eq!(first.0, csv(c.path()));
    assert_eq!(first.1, std::fs::read(c.path().join("paths.json")).unwrap());
}

#[test]
fn limit_cov_brownian_and_cauchy_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = selfsim(
        &["limit-cov", "--family", "bm", "--times", "0,1,2", "--alphas", "0.5"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = limit_rows(&dir.path().join("limit_cov.csv"));
    assert_eq!(rows.len(), 9);
    let at = |s: f64, t: f64| rows.iter().find(|r| r.0[0] == s && r.0[2] == t).unwrap();
    let bm12 = 2f64.sqrt() * std::f64::consts::PI / 4.0;
    assert!((at(1.0, 2.0).1 - bm12).abs() < 1e-10);
    assert!((at(2.0, 1.0).1 - bm12).abs() < 1e-10);
    for r in rows.iter().filter(|r| r.0[0] == 0.0 || r.0[2] == 0.0) {
        assert_eq!(r.1, 0.0);
        assert_eq!(r.2, "ZERO_BOUNDARY");
    }
    let side = read_json(&dir.path().join("limit_cov.json"));
    assert_eq!(side["command"], "limit-cov");

    let dir = tempfile::tempdir().unwrap();
    let o = selfsim(
        &["limit-cov", "--family", "stable", "--r", "1", "--times", "1,2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = limit_rows(&dir.path().join("limit_cov.csv"));
    let r = rows.iter().find(|r| r.0 == [1.0, 0.5, 2.0, 0.5]).unwrap();
    let pi2 = std::f64::consts::PI.powi(2) / 4.0;
    assert!((r.1 - pi2).abs() < 1e-6, "{} vs {pi2}", r.1);
}

#[test]
fn limit_cov_iterated_is_monte_carlo_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = selfsim(&["limit-cov", "--family", "iterated-bm", "--times", "1,2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Monte-Carlo-only"), "{}", stderr(&o));
}

#[test]
fn verify_properties_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = selfsim(&["verify", "properties", "--seed", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = read_json(&dir.path().join("properties.json"));
    assert_eq!(rep["experiment"], "PROPERTY_SUITE");
    assert_eq!(rep["seed"], 1);
    assert_eq!(rep["config"]["run"]["experiment"]["name"], "properties");
}

#[test]
fn verify_clt_cov_brownian_passes_at_default_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "verify", "clt-cov", "--family", "bm", "--n", "400", "--reps", "1000", "--seed", "7",
    ];
    let o = selfsim(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("clt-cov.estimates.csv").exists());

    // The same run with an impossible diagonal tolerance is a verification failure.
    let dir = tempfile::tempdir().unwrap();
    let mut strict = args.to_vec();
    strict.extend(["--diag-rel", "1e-9"]);
    let o = selfsim(&strict, dir.path());
    assert_eq!(o.status.code(), Some(1));
    let rep = read_json(&dir.path().join("clt-cov.json"));
    let failed: Vec<&Value> = rep["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|v| v["pass"] == false)
        .collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["check"], "diagonal");
}

#[test]
fn verify_tail_cauchy_exponent_near_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = selfsim(&["verify", "tail", "--family", "stable", "--r", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let rep = read_json(&dir.path().join("tail.json"));
    let theta = rep["estimates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["name"] == "theta_hat")
        .unwrap()["value"]
        .as_f64()
        .unwrap();
    assert!((theta - 1.0).abs() < 0.2, "θ̂ = {theta}");
    assert!(dir.path().join("tail.exceedances.csv").exists());
}

#[test]
fn explain_prints_resolved_config_with_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    std::fs::write(
        &file,
        "seed = 3\n[process]\nfamily = \"stable\"\nr = 1.5\n[experiment]\nname = \"tail\"\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = selfsim(
        &["verify", "--config", file.to_str().unwrap(), "--r", "1.2", "--explain"],
        &out,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg: toml::Table = toml::from_str(&String::from_utf8_lossy(&o.stdout)).unwrap();
    assert_eq!(cfg["seed"].as_integer(), Some(3));
    assert_eq!(cfg["process"]["family"].as_str(), Some("stable"));
    assert_eq!(cfg["process"]["r"].as_float(), Some(1.2));
    assert_eq!(cfg["experiment"]["name"].as_str(), Some("tail"));
    // Grid-dependent defaults are filled in.
    assert_eq!(cfg["experiment"]["points"].as_array().unwrap().len(), 2);
    assert!(!out.exists(), "--explain must not run the command");
}

#[test]
fn output_directory_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_selfsim"))
        .args(["limit-cov", "--times", "1"])
        .env("SELFSIM_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("limit_cov.csv").exists());
}

#[test]
fn invalid_configs_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[grid]\ntime_pionts = 9\n").unwrap();
    let o = selfsim(&["simulate", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("time_pionts"), "{}", stderr(&o));

    let o = selfsim(&["simulate", "--formats", "csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = selfsim(&["verify"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = selfsim(&["simulate", "--level-interval", "0.8,0.2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("paths.csv").exists());
}
