use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn sdelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdelab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn moments_config() -> Value {
    json!({
        "kind": "moments",
        "seed": 3,
        "params": {
            "objective": {"family": "quadratic", "a": [[2.0, 0.3], [0.3, 1.0]], "b": [0.5, -1.0], "s": [[1.0, 0.0], [0.0, 2.0]]},
            "x": [0.5, 0.2],
            "eta": 0.1,
            "l_values": [1, 4],
            "n_samples": 20000
        }
    })
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_experiments_names_every_kind() {
    let o = sdelab(&["list-experiments"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for k in ["moments", "weak-order", "equilibrium", "lsr-sweep", "counterexample", "tail-index"] {
        assert!(text.lines().any(|l| l.starts_with(k)), "{k} missing from\n{text}");
    }
}

#[test]
fn validate_reports_field_paths() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.json", &moments_config());
    assert!(sdelab(&["validate", "--config", &good]).status.success());

    let mut bad = moments_config();
    bad["params"]["eta"] = json!("fast");
    let p = write_config(dir.path(), "bad_type.json", &bad);
    let o = sdelab(&["validate", "--config", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("params.eta"), "{}", stderr(&o));

    let mut bad = moments_config();
    bad["params"]["eta"] = json!(-0.1);
    bad["params"]["l_values"] = json!([0, 2]);
    bad["params"]["x"] = json!([1.0]);
    let p = write_config(dir.path(), "bad_values.json", &bad);
    let o = sdelab(&["validate", "--config", &p]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for path in ["params.eta", "params.l_values[0]", "params.x"] {
        assert!(err.contains(path), "{path} not reported in\n{err}");
    }

    let mut bad = moments_config();
    bad["params"]["learning_rate"] = json!(0.1);
    let p = write_config(dir.path(), "unknown.json", &bad);
    let o = sdelab(&["validate", "--config", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rate"));
}

#[test]
fn lsr_threshold_rule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = |kappas: Value| {
        json!({
            "kind": "lsr-sweep",
            "params": {
                "objective": {"family": "rayleigh", "dim": 4, "samples": 20, "seed": 1},
                "eta": 0.1, "batch": 2, "lambda": 0.01, "kappas": kappas, "steps": 1000, "replicas": 2, "c": 2.0
            }
        })
    };
    let p = write_config(dir.path(), "only_small.json", &cfg(json!([1, 2])));
    let o = sdelab(&["validate", "--config", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("C must satisfy C < √κ"));

    let p = write_config(dir.path(), "mixed.json", &cfg(json!([1, 2, 8])));
    let o = sdelab(&["validate", "--config", &p]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning: params.kappas[1]"));
}

fn listed_and_present(dir: &Path) -> (BTreeSet<String>, BTreeSet<String>) {
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let mut listed: BTreeSet<String> =
        manifest["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap().to_string()).collect();
    listed.insert("manifest.json".into());
    let present = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    (listed, present)
}

#[test]
fn run_writes_manifest_and_respects_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", &moments_config());
    let out = dir.path().join("out");
    let out_s = out.to_string_lossy().into_owned();

    let o = sdelab(&["run", "--config", &cfg, "--out", &out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (listed, present) = listed_and_present(&out);
    assert_eq!(listed, present);
    assert!(present.contains("moments.csv") && present.contains("verdict.json"));
    let csv = std::fs::read_to_string(out.join("moments.csv")).unwrap();
    assert!(csv.starts_with("l,order,entries,max_abs_z,pass\n"));
    assert!(!csv.contains('\r'));

    let o = sdelab(&["run", "--config", &cfg, "--out", &out_s]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--overwrite"));

    let o = sdelab(&["run", "--config", &cfg, "--out", &out_s, "--overwrite", "--seed", "9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);

    let foreign = dir.path().join("foreign");
    std::fs::create_dir(&foreign).unwrap();
    std::fs::write(foreign.join("notes.txt"), "keep me").unwrap();
    let o = sdelab(&["run", "--config", &cfg, "--out", &foreign.to_string_lossy(), "--overwrite"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(std::fs::read_to_string(foreign.join("notes.txt")).unwrap(), "keep me");
}

#[test]
fn outputs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", &moments_config());
    let mut digests = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = sdelab(&["--threads", threads, "run", "--config", &cfg, "--out", &out.to_string_lossy()]);
        assert!(o.status.success(), "{}", stderr(&o));
        digests.push(std::fs::read(out.join("manifest.json")).unwrap());
    }
    assert_eq!(digests[0], digests[1]);
}

#[test]
fn asserted_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = json!({
        "kind": "tail-index",
        "assert": true,
        "params": {"d": 10, "k2": 50, "repetitions": 20, "betas": [0.5], "cauchy": false, "z_max": 1e-9}
    });
    let p = write_config(dir.path(), "t.json", &v);
    let o = sdelab(&["run", "--config", &p, "--out", &dir.path().join("a").to_string_lossy()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    v["assert"] = json!(false);
    let p = write_config(dir.path(), "t.json", &v);
    let o = sdelab(&["run", "--config", &p, "--out", &dir.path().join("b").to_string_lossy()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("fail"));
}

#[test]
fn relative_output_resolves_against_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = moments_config();
    v["output"] = json!("results/m");
    let cfg = write_config(dir.path(), "m.json", &v);
    let o = sdelab(&["run", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("results/m/manifest.json").exists());
}
