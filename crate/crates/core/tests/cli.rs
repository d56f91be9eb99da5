use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bjj_core::cli::{EVOLVE_COLUMNS, SEMICLASSICAL_COLUMNS, SWEEP_COLUMNS};

fn bjj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bjj"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn bjj")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run_ok(cmd: &str, config: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = bjj(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn ground_report_and_config_copy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.json", r#"{"model": {"N": 50, "U": 0.25, "J": 1}, "noise": {}}"#);
    let out = dir.path().join("run");
    run_ok("ground", &cfg, &out, &[]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("ground.json")).unwrap()).unwrap();
    assert!((report["xi"].as_f64().unwrap() - 1.92).abs() < 0.005);
    assert!((report["omegaJ"].as_f64().unwrap() - 3.67).abs() < 0.005);
    assert_eq!(report["regime"], "josephson");
    assert_eq!(fs::read(out.join("config.json")).unwrap(), fs::read(&cfg).unwrap());
}

#[test]
fn negative_interaction_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.json", r#"{"model": {"N": 50, "U": -0.25}}"#);
    let o = bjj(&["ground", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("model.U"), "{err}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "e.json",
        "{\n \"model\": {\"N\": 4, \"U\": 0.1},\n \"time\": {\"t_end\": 1, \"steps\": 4},\n \"gamma\": 1\n}",
    );
    let o = bjj(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("gamma") && err.contains("line 4"), "{err}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bjj(&["ground", "--config", "/nonexistent/x.json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fock_regime_semiclassical_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"model": {"N": 4, "U": 10}, "time": {"t_end": 1, "steps": 2}, "trajectories": 10}"#,
    );
    let o = bjj(&["semiclassical", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evolve_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "e.json",
        r#"{"model": {"N": 10, "U": 0.1}, "noise": {"gamma3": 0.01}, "time": {"t_end": 2, "steps": 20}, "overlay": true}"#,
    );
    let out = dir.path().join("run");
    run_ok("evolve", &cfg, &out, &[]);
    let (header, rows) = read_csv(&out.join("evolve.csv"));
    let mut expect: Vec<&str> = EVOLVE_COLUMNS.to_vec();
    expect.extend(["g1_ref", "Gamma_bosonic"]);
    assert_eq!(header, expect);
    assert_eq!(rows.len(), 21);
    for row in &rows {
        for cell in row {
            cell.parse::<f64>().unwrap();
        }
    }
    assert_eq!(rows[0][0], "0");
}

#[test]
fn zero_noise_keeps_coherence_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "e.json", r#"{"model": {"N": 20, "U": 0.5}, "time": {"t_end": 5, "steps": 10}}"#);
    let out = dir.path().join("run");
    run_ok("evolve", &cfg, &out, &[]);
    let (header, rows) = read_csv(&out.join("evolve.csv"));
    let g = header.iter().position(|h| h == "g1").unwrap();
    let g0: f64 = rows[0][g].parse().unwrap();
    for row in &rows {
        let v: f64 = row[g].parse().unwrap();
        assert!((v - g0).abs() < 1e-8, "{v} {g0}");
    }
}

#[test]
fn semiclassical_is_reproducible_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"model": {"N": 50, "U": 0.25}, "noise": {"gamma3": 0.01}, "time": {"t_end": 1, "steps": 5}, "trajectories": 400}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    run_ok("semiclassical", &cfg, &a, &["--seed", "11", "--threads", "1"]);
    run_ok("semiclassical", &cfg, &b, &["--seed", "11", "--threads", "3"]);
    run_ok("semiclassical", &cfg, &c, &["--seed", "12"]);
    let fa = fs::read(a.join("semiclassical.csv")).unwrap();
    assert_eq!(fa, fs::read(b.join("semiclassical.csv")).unwrap());
    assert_ne!(fa, fs::read(c.join("semiclassical.csv")).unwrap());
    let (header, rows) = read_csv(&a.join("semiclassical.csv"));
    assert_eq!(header, SEMICLASSICAL_COLUMNS);
    assert_eq!(rows.len(), 6);
}

#[test]
fn evolve_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "e.json",
        r#"{"model": {"N": 8, "U": 0.3}, "noise": {"gamma2": 0.02, "gammaL": 0.01, "gammaR": 0.01}, "time": {"t_end": 3, "steps": 30}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok("evolve", &cfg, &a, &[]);
    run_ok("evolve", &cfg, &b, &[]);
    assert_eq!(fs::read(a.join("evolve.csv")).unwrap(), fs::read(b.join("evolve.csv")).unwrap());
}

#[test]
fn single_point_sweep_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "w.json",
        r#"{"trap": {"d": 5e-6, "V0": 470, "omega_x": 1256.6370614359173, "omega_perp": 3141.592653589793, "N": 200},
            "grid": {"points": 1024}, "N": [200], "V0": [470]}"#,
    );
    let out = dir.path().join("run");
    run_ok("sweep", &cfg, &out, &[]);
    let (header, rows) = read_csv(&out.join("sweep.csv"));
    assert_eq!(header, SWEEP_COLUMNS);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][12], "true");
    let mu: f64 = rows[0][2].parse().unwrap();
    assert!(mu > 380.0 && mu < 470.0, "{mu}");
}

#[test]
fn rates_for_technical_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.json",
        r#"{"dephasing": {"kind": "technical_slope", "eta": 1e-52}, "loss": {"kind": "flat_spectrum", "b_minus_plus": 0}, "d": 5e-6, "j_hz": 1}"#,
    );
    let out = dir.path().join("run");
    run_ok("rates", &cfg, &out, &[]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("rates.json")).unwrap()).unwrap();
    let hbar = 1.054_571_817e-34;
    let expect = 0.5 * (5e-6f64 / hbar).powi(2) * 1e-52;
    assert!((r["gamma_p"].as_f64().unwrap() / expect - 1.0).abs() < 1e-12);
    assert_eq!(r["gamma_loss"].as_f64().unwrap(), 0.0);
    let in_j = r["gamma_p_over_j"].as_f64().unwrap();
    assert!((in_j * 2.0 * std::f64::consts::PI / expect - 1.0).abs() < 1e-12);
}

#[test]
fn lifetime_from_data_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let mut text = String::from("z0_um,tau_s,sigma_s\n");
    for z in [3.0f64, 5.0, 8.0, 13.0, 21.0, 34.0] {
        let tau = z * z / 65.0;
        text.push_str(&format!("{z},{tau},{}\n", 0.05 * tau));
    }
    fs::write(&data, text).unwrap();
    let cfg = write_config(dir.path(), "l.json", "{}");
    let out = dir.path().join("run");
    run_ok("lifetime", &cfg, &out, &["--data", data.to_str().unwrap()]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("lifetime.json")).unwrap()).unwrap();
    for key in ["c_total", "c1", "c2", "I_nA_sqrtHz", "slope_free_fit"] {
        assert!(r[key].is_number(), "{key}");
    }
    assert!((r["c_total"].as_f64().unwrap() - 65.0).abs() < 1e-6);
    assert!((r["slope_free_fit"].as_f64().unwrap() - 2.0).abs() < 1e-6);
}

#[test]
fn lifetime_without_data_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "l.json", "{}");
    let o = bjj(&["lifetime", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
