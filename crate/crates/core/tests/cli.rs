use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workdir(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn run(dir: &Path, args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_orlicz-distort"));
    c.args(args).arg("--out").arg(dir).env_remove("ORLICZ_DISTORT_THREADS");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# config_hash="));
    text.lines().skip(2).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn distort_kaufman_slope() {
    let d = workdir("distort");
    let cfg = d.join("a.json");
    fs::write(
        &cfg,
        r#"{"n": 2, "young": {"family": "power", "p": 4}, "gauge": {"family": "power", "alpha": 1}}"#,
    )
    .unwrap();
    let out = run(&d, &["distort", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&d.join("distort.csv"));
    assert_eq!(rows.len(), 200);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r[0].parse::<f64>().unwrap().ln(), r[1].parse::<f64>().unwrap().ln()))
        .collect();
    let slope = (pts[199].1 - pts[0].1) / (pts[199].0 - pts[0].0);
    assert!((slope - 4.0 / 3.0).abs() < 0.02 * 4.0 / 3.0, "{slope}");
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("distort.json")).unwrap()).unwrap();
    assert_eq!(side["invariants_hold"], true);
}

#[test]
fn examples_table_row() {
    let d = workdir("examples");
    let out = run(&d, &["examples"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(d.join("examples.csv")).unwrap();
    let mut lines = text.lines().skip(1);
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let row = lines
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|r| {
            r[col("example")] == "2"
                && r[col("n")] == "2"
                && r[col("q")] == "2.0"
                && r[col("alpha")] == "1.0"
                && r[col("beta")] == "0.0"
        })
        .expect("row (n,q)=(2,2), (α,β)=(1,0)");
    // ψ = r^2 (log 1/r)^1
    assert_eq!(row[col("psi_a")], "2.0");
    assert_eq!(row[col("psi_b")], "1.0");
    assert_eq!(row[col("psi_c")], "0.0");
}

#[test]
fn netmeasure_from_points() {
    let d = workdir("netmeasure");
    fs::write(d.join("pts.csv"), "x,y\n0.1,0.1\n0.12,0.11\n0.9,0.4\n").unwrap();
    let cfg = d.join("net.json");
    fs::write(
        &cfg,
        r#"{"gauge": {"family": "power", "alpha": 1}, "sigma": 0.5, "points_csv": "pts.csv", "level": 6}"#,
    )
    .unwrap();
    let out = run(&d, &["netmeasure", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("netmeasure.json")).unwrap()).unwrap();
    assert_eq!(side["cubes"], 3);
    let v = side["value"].as_f64().unwrap();
    assert!(v > 0.0 && v <= 3.0 * 2f64.sqrt() / 64.0 * (1.0 + 1e-12));
}

#[test]
fn fractal_output_is_reproducible() {
    let cfg_text = r#"{"n": 2, "q": 1.5, "nu": 2.0, "delta": 1.1, "levels": 4, "seed": 5, "samples": 8000, "psi_probe": false}"#;
    let base = workdir("fractal-config");
    let cfg = base.join("f.json");
    fs::write(&cfg, cfg_text).unwrap();
    let mut csvs = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let d = workdir(&format!("fractal{i}"));
        let out = run(&d, &["fractal", "--config", cfg.to_str().unwrap()], &[("ORLICZ_DISTORT_THREADS", threads)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(fs::read_to_string(d.join("fractal.csv")).unwrap());
    }
    assert!(csvs[0] == csvs[1] && csvs[1] == csvs[2], "{csvs:#?}");

    let d = workdir("fractal-seed");
    let out = run(&d, &["fractal", "--config", cfg.to_str().unwrap(), "--seed", "6"], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(fs::read_to_string(d.join("fractal.csv")).unwrap(), csvs[0]);
}

#[test]
fn verify_default_corpus_passes() {
    let d = workdir("verify");
    let out = run(&d, &["verify"], &[]);
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("verify.json")).unwrap()).unwrap();
    let failed: Vec<&serde_json::Value> = side["checks"].as_array().unwrap().iter().filter(|c| c["passed"] == false).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn exit_codes() {
    let d = workdir("errors");
    let bad = d.join("bad.json");
    fs::write(&bad, "{\"n\": 2,\n \"young\": {\"family\": \"power\", \"p\": 4},\n \"gauge\": oops}").unwrap();
    let out = run(&d, &["distort", "--config", bad.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");

    let missing = run(&d, &["distort", "--config", d.join("nope.json").to_str().unwrap()], &[]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(run(&d, &["examples", "--tol", "-1"], &[]).status.code(), Some(2));
    assert_eq!(run(&d, &["examples"], &[("ORLICZ_DISTORT_THREADS", "zero")]).status.code(), Some(2));

    // a divergent tail integral cannot be decided
    let inc = d.join("inc.json");
    fs::write(
        &inc,
        r#"{"n": 2, "young": {"family": "powerlog", "p": 2, "q": 1}, "gauge": {"family": "power", "alpha": 1}}"#,
    )
    .unwrap();
    assert_eq!(run(&d, &["distort", "--config", inc.to_str().unwrap()], &[]).status.code(), Some(3));

    let low = d.join("low.json");
    fs::write(&low, r#"{"gauge": {"family": "power", "alpha": 1}, "sigma": 0.001, "set": {"cubes": [{"level": 2, "coords": [1, 1]}]}}"#).unwrap();
    assert_eq!(run(&d, &["netmeasure", "--config", low.to_str().unwrap()], &[]).status.code(), Some(1));
}
