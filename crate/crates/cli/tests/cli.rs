use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gpwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpwave")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn simulate_config(out: &Path, dim: usize) -> String {
    format!(
        r#"{{
  "name": "smoke",
  "dim": {dim},
  "grid": {{"n": 64, "L": 32.0}},
  "datum": {{"kind": "gaussian", "amplitude": 0.05, "width": 2.0, "center": [0.0, 0.0], "wavevector": [0.5, 0.0]}},
  "task": "simulate",
  "task_params": {{"t_end": 1.0, "dt": 0.01, "sample_every": 0.25}},
  "seed": 7,
  "out_dir": "{}"
}}"#,
        out.display()
    )
}

#[test]
fn simulate_writes_snapshot_norms_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "c.json", &simulate_config(&out, 2));
    let o = gpwave(&["simulate", &cfg, "--emit-gnuplot"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let (field, t) = gpwave::io::read_snapshot::<f64>(out.join("final.gpf")).unwrap();
    assert_eq!((field.grid().dim(), field.grid().n(), t), (2, 64, 1.0));
    let rows = gpwave::io::read_norm_table(out.join("norms.csv")).unwrap();
    // five sample times, six norms each
    assert_eq!(rows.len(), 5 * 6);
    assert!(rows.iter().any(|r| r.norm_name == "H1dot" && r.t == 1.0));

    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["task_params"]["scheme"], "strang_rk4");
    let listed: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(listed, ["norms.csv", "final.gpf", "norms.gp"]);
    use sha2::Digest;
    for f in manifest["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"], hex::encode(sha2::Sha256::digest(&bytes)));
    }
}

#[test]
fn invalid_dimension_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &simulate_config(&tmp.path().join("run"), 4));
    let o = gpwave(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dim"));
    assert!(!tmp.path().join("run").exists());

    let text = simulate_config(&tmp.path().join("run"), 2).replace("\"seed\": 7", "\"seed\": 7, \"colour\": 1");
    let o = gpwave(&["run", &write_config(tmp.path(), "d.json", &text)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let o = gpwave(&["scatter", &cfg.replace("c.json", "d.json")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn same_config_gives_identical_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &simulate_config(&tmp.path().join("unused"), 2));
    let scan = write_config(
        tmp.path(),
        "s.json",
        &format!(
            r#"{{"name": "scan", "dim": 2, "grid": {{"n": 8, "L": 1.0}}, "datum": {{"kind": "gaussian", "amplitude": 1.0, "width": 0.1}},
                "task": "phase-scan", "task_params": {{"samples": 20000, "time_bound_kappa": 0.1}}, "seed": 3, "out_dir": "{}"}}"#,
            tmp.path().join("unused").display()
        ),
    );
    for (cfg, table) in [(&cfg, "norms.csv"), (&scan, "scan.csv")] {
        let runs: Vec<Vec<u8>> = ["a", "b"]
            .iter()
            .map(|d| {
                let out = tmp.path().join(d);
                let o = gpwave(&["run", cfg, "--out-dir", out.to_str().unwrap()]);
                assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
                std::fs::read(out.join(table)).unwrap()
            })
            .collect();
        assert_eq!(runs[0], runs[1], "{table}");
    }
}

#[test]
fn blow_up_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let text = simulate_config(&tmp.path().join("run"), 2)
        .replace("\"amplitude\": 0.05", "\"amplitude\": 50.0")
        .replace("\"t_end\": 1.0", "\"t_end\": 5.0");
    let o = gpwave(&["run", &write_config(tmp.path(), "c.json", &text)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
