use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

use oscsync::cli::{run, EXIT_INVALID, EXIT_OK};

fn six_node_config() -> Value {
    json!({
        "version": 1,
        "seed": 7,
        "graph": { "kind": "six-node" },
        "coupling": { "kind": "sine", "K": 1.0 },
        "state": { "kind": "six-node", "lambda1": 0.0, "lambda2": 0.0 }
    })
}

fn write_config(dir: &TempDir, name: &str, value: &Value) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path
}

fn invoke(verb: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec![
        "oscsync".to_string(),
        verb.to_string(),
        "--config".into(),
        config.display().to_string(),
        "--output-dir".into(),
        out.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    run(args)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(run(["oscsync", "--help"]), EXIT_OK);
    assert_eq!(run(["oscsync", "--version"]), EXIT_OK);
    assert_eq!(run(["oscsync", "frobnicate", "--config", "x.json"]), EXIT_INVALID);
    assert_eq!(run(["oscsync", "stability"]), EXIT_INVALID);
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.json");
    assert_eq!(invoke("stability", &missing, &dir.path().join("o"), &[]), EXIT_INVALID);
    assert!(!dir.path().join("o").exists());
}

#[test]
fn stability_of_the_six_node_example() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &six_node_config());
    let out = dir.path().join("out");
    assert_eq!(invoke("stability", &cfg, &out, &[]), EXIT_OK);
    let report = read_json(&out.join("stability.json"));
    assert_eq!(report["class"], "Unstable");
    assert!(report["max_nonflow_eigenvalue"].as_f64().unwrap() > 0.5);
    let cut = report["certificate"]["cut_value"].as_f64().unwrap();
    assert!((cut + 1.0).abs() < 1e-12);
    assert!(report["residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn manifest_lists_outputs_with_hashes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &six_node_config());
    let out = dir.path().join("out");
    assert_eq!(invoke("cut-scan", &cfg, &out, &[]), EXIT_OK);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["command"], "cut-scan");
    assert_eq!(manifest["seed"], 7);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 1);
    let file = outputs[0]["file"].as_str().unwrap();
    let data = fs::read(out.join(file)).unwrap();
    let hex: String = Sha256::digest(&data).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(outputs[0]["sha256"], hex);
    assert_eq!(outputs[0]["bytes"], data.len());
    let scan = read_json(&out.join("cut_scan.json"));
    assert_eq!(scan["mode"], "exhaustive");
    assert_eq!(scan["negative"], true);
}

#[test]
fn disconnected_graph_is_rejected_before_any_output() {
    let dir = TempDir::new().unwrap();
    let mut value = six_node_config();
    value["graph"] = json!({ "kind": "edges", "n": 4, "edges": [[1, 2], [3, 4]] });
    value["state"] = json!({ "kind": "phases", "phi": [0.0, 0.0, 1.0, 1.0] });
    let cfg = write_config(&dir, "c.json", &value);
    let out = dir.path().join("out");
    assert_eq!(invoke("cut-scan", &cfg, &out, &[]), EXIT_INVALID);
    assert!(!out.exists());
    // Stability only needs a point, not connectivity.
    assert_eq!(invoke("stability", &cfg, &out, &[]), EXIT_OK);
}

#[test]
fn surface_grid_flag() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &six_node_config());
    let out = dir.path().join("out");
    assert_eq!(invoke("surface", &cfg, &out, &["--grid", "41"]), EXIT_OK);
    let csv = fs::read_to_string(out.join("surface.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1681);
    for row in rows {
        let value: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(value < 0.0);
    }
    let summary = read_json(&out.join("surface.json"));
    assert_eq!(summary["grid"], 41);
    assert_eq!(summary["all_negative"], true);
}

#[test]
fn validate_reports_findings() {
    let dir = TempDir::new().unwrap();
    let good = write_config(&dir, "good.json", &six_node_config());
    assert_eq!(run(["oscsync", "validate", "--config", good.to_str().unwrap()]), EXIT_OK);

    let mut value = six_node_config();
    value.as_object_mut().unwrap().remove("seed");
    value["coupling"] = json!({ "kind": "fb", "b": 4.0 });
    value["experiment"] = json!({ "n": 10 });
    let bad = write_config(&dir, "bad.json", &value);
    let out = dir.path().join("findings");
    assert_eq!(invoke("validate", &bad, &out, &[]), EXIT_INVALID);
    let findings = read_json(&out.join("findings.json"));
    let text = findings.to_string();
    assert!(text.contains("missing seed"), "{text}");
    assert!(text.contains("b outside (0,π)"), "{text}");
    assert!(text.contains("N not a multiple of 3"), "{text}");
}

#[test]
fn unknown_fields_are_errors() {
    let dir = TempDir::new().unwrap();
    let mut value = six_node_config();
    value["modle"] = json!({ "epsilon": 1.0 });
    let cfg = write_config(&dir, "c.json", &value);
    assert_eq!(invoke("stability", &cfg, &dir.path().join("o"), &[]), EXIT_INVALID);
}

#[test]
fn overrides_change_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &six_node_config());
    let out = dir.path().join("out");
    let code = invoke(
        "stability",
        &cfg,
        &out,
        &["--set", r#"state={"kind":"phases","phi":[0,0,0,0,0,0]}"#],
    );
    assert_eq!(code, EXIT_OK);
    let report = read_json(&out.join("stability.json"));
    assert_eq!(report["class"], "Stable");
    assert!(report["certificate"].is_null());
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["state"]["kind"], "phases");
}

#[test]
fn simulate_writes_a_descending_potential() {
    let dir = TempDir::new().unwrap();
    let mut value = six_node_config();
    value["state"] = json!({ "kind": "random" });
    value["run"] = json!({ "horizon": 10.0, "sample_every": 0.25 });
    let cfg = write_config(&dir, "c.json", &value);
    let out = dir.path().join("out");
    assert_eq!(invoke("simulate", &cfg, &out, &[]), EXIT_OK);
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,phi_0,phi_1,phi_2,phi_3,phi_4,phi_5,V");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 41);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[40][0], 10.0);
    for w in rows.windows(2) {
        assert!(w[1][7] <= w[0][7] + 1e-12);
    }
}

#[test]
fn pulse_writes_firings() {
    let dir = TempDir::new().unwrap();
    let mut value = six_node_config();
    value["model"] = json!({ "epsilon": 0.05 });
    value["state"] = json!({ "kind": "random" });
    value["run"] = json!({ "horizon": 5.0 });
    let cfg = write_config(&dir, "c.json", &value);
    let out = dir.path().join("out");
    assert_eq!(invoke("pulse", &cfg, &out, &[]), EXIT_OK);
    let firings = fs::read_to_string(out.join("firings.csv")).unwrap();
    // Five periods of six oscillators, give or take one firing each.
    let count = firings.lines().count() - 1;
    assert!((24..=36).contains(&count), "{count}");
}
