use std::path::Path;
use std::process::Command;

fn sysid(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_sysid"))
        .args(args)
        .env_remove("SYSID_WORKERS")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "sysid {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

fn json(file: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap()
}

#[test]
fn gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.json"), path(dir.path(), "b.json"));
    for out in [&a, &b] {
        sysid(&["gen", "--generator", "synthetic", "--n", "100", "--w", "2", "--seed", "7", "--out", out]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let model = json(&a);
    assert_eq!(model["n"], 100);
    assert_eq!(model["A"].as_array().unwrap().len(), 100);

    let c = path(dir.path(), "c.json");
    sysid(&["gen", "--generator", "synthetic", "--n", "100", "--w", "2", "--seed", "8", "--out", &c]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn check_reports_positive_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let model = path(dir.path(), "m.json");
    let report = path(dir.path(), "r.json");
    sysid(&["gen", "--generator", "mass-spring", "--masses", "10", "--out", &model]);
    sysid(&["check", "--model", &model, "--out", &report]);
    let r = json(&report);
    assert!(r["gamma"].as_f64().unwrap() > 0.0);
    assert!(r["lambda_min"].as_f64().unwrap() > 0.0);
    assert_eq!(r["satisfied"]["incoherence"], true);
}

#[test]
fn zero_lambda_matches_least_squares() {
    let dir = tempfile::tempdir().unwrap();
    let model = path(dir.path(), "m.json");
    let batch = path(dir.path(), "b.csv");
    sysid(&["gen", "--generator", "synthetic", "--n", "6", "--w", "1", "--seed", "3", "--out", &model]);
    sysid(&["simulate", "--model", &model, "--d", "80", "--seed", "5", "--out", &batch]);
    let settings = path(dir.path(), "s.json");
    std::fs::write(&settings, r#"{"kkt_tol": 1e-11}"#).unwrap();
    let (reg, ls) = (path(dir.path(), "reg.json"), path(dir.path(), "ls.json"));
    sysid(&["solve", "--model", &model, "--batch", &batch, "--lambda", "0", "--config", &settings, "--out", &reg]);
    sysid(&["solve", "--model", &model, "--batch", &batch, "--estimator", "least-squares", "--out", &ls]);
    let (reg, ls) = (json(&reg), json(&ls));
    assert_eq!(reg["support_mask"], ls["support_mask"]);
    let flat = |v: &serde_json::Value| -> Vec<f64> {
        v["theta_hat"]
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()))
            .collect()
    };
    let (a, b) = (flat(&reg), flat(&ls));
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(gap <= 1e-6 * scale, "gap {gap}");
}

#[test]
fn sweep_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "cfg.json");
    std::fs::write(
        &cfg,
        r#"{"generator": {"kind": "synthetic", "n": 8, "w": 1},
            "T_list": [3, 4], "d_list": [10, 40], "seeds": [1, 2, 3],
            "estimators": ["block_reg", "least_squares"]}"#,
    )
    .unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    sysid(&["sweep", "--config", &cfg, "--out", &a, "--workers", "1"]);
    sysid(&["sweep", "--config", &cfg, "--out", &b, "--workers", "4"]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.as_bytes(), std::fs::read(&b).unwrap().as_slice());
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3 * 2);
    assert!(text.contains("least_squares,undefined"));

    let single = path(dir.path(), "single.csv");
    sysid(&["sweep", "--config", &cfg, "--seed", "2", "--out", &single]);
    assert_eq!(std::fs::read_to_string(&single).unwrap().lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn worker_cap_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "cfg.json");
    std::fs::write(
        &cfg,
        r#"{"generator": {"kind": "mass_spring", "masses": 3, "dt": 0.2},
            "T_list": [3], "d_list": [30], "seeds": [0]}"#,
    )
    .unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_sysid"))
        .args(["sweep", "--config", &cfg])
        .env("SYSID_WORKERS", "0")
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("workers"));
}

#[test]
fn malformed_model_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let model = path(dir.path(), "m.json");
    std::fs::write(&model, r#"{"n": 1, "m": 1, "row_sizes": [1, 1], "col_sizes": [1], "A": [[1.0]]}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sysid"))
        .args(["check", "--model", &model])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains('B') || err.contains("sigma"), "{err}");
}
