use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ehstore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehstore")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn simulate_output_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"policy_sweep": {"values": [0.8, 1.2]}, "buffers": [3, "infinite"], "sim": {"slots": 20000, "seed": 7}}"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = ehstore(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--format", "both"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    assert!(ta.iter().any(|(n, _)| n == "simulate.csv"));
    assert!(ta.iter().any(|(n, _)| n == "simulate.json"));
    assert!(ta.iter().any(|(n, _)| n.starts_with("histograms")));
    assert_eq!(ta, tb);
}

#[test]
fn analyze_stdout_is_reproducible() {
    let a = ehstore(&["analyze"]);
    let b = ehstore(&["analyze"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).starts_with("#schema=analyze.v1\n"));
}

#[test]
fn zero_slots_is_a_config_error() {
    let o = ehstore(&["simulate", "--slots", "0"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"polcy_sweep": {"values": [0.5]}}"#);
    let o = ehstore(&["analyze", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("polcy_sweep"));
}

#[test]
fn fast_validate_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ehstore(&["validate", "--fast", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("validate.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
}

#[test]
fn perturbed_atom_fails_validate() {
    let o = ehstore(&["validate", "--fast", "--perturb-atom", "1.05"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("check integral residuals: FAIL"));
}

#[test]
fn single_point_is_echoed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"policy_sweep": {"values": [0.965]}, "buffers": [4]}"#);
    let o = ehstore(&["analyze", "--config", &cfg]);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("0.965,4,"));
}

#[test]
fn optimize_writes_note() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ehstore(&["optimize", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(tmp.path().join("optimize.csv").exists());
    assert!(fs::read_to_string(tmp.path().join("optimize.note")).unwrap().contains("non-decreasing"));
}
