use std::fs;
use std::process::{Command, Output};

fn formctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_formctl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn transform_prints_csv_rows() {
    let o = formctl(&["transform", "--partition", "3,3,3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.len() == 9));
    assert_eq!(rows[1][..3], [-0.5, -0.5, 1.0]);
    assert!(rows[8].iter().all(|&v| (v - 1.0 / 9.0).abs() < 1e-16));
}

#[test]
fn bad_partition_exits_with_config_code() {
    let o = formctl(&["transform", "--partition", "3,1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("partition[1]"));
}

#[test]
fn simulate_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&stdout(&formctl(&["preset", "paper_3x3"]))).unwrap();
    cfg["integrator"]["duration"] = serde_json::json!(0.2);
    let cfg_path = dir.path().join("short.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out = dir.path().join("out");
    let o = formctl(&[
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trajectory.csv", "shape.csv", "mindist.csv", "report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(stdout(&o).contains("surface time"));
}

#[test]
fn audit_passes_on_preset() {
    let o = formctl(&["audit", "--preset", "paper_3x3", "--steps", "200"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("max deviation"));
}

#[test]
fn missing_config_exits_with_io_code() {
    let o = formctl(&["simulate", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_and_preset_conflict() {
    let o = formctl(&["audit", "--config", "a.json", "--preset", "head_on"]);
    assert_eq!(o.status.code(), Some(2));
}
