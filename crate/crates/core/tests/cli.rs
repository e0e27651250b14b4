use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn mutascreen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mutascreen")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = mutascreen(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, id: &str, seed: u64) -> String {
    let cfg = json!({
        "experiment_id": id,
        "model": {"toy": {"layers": 2, "d_model": 16, "d_hidden": 32}},
        "prompts": [{"prompt_id": "p0", "text": "The egg hatches into a"}],
        "block_size": 4,
        "mutation_kinds": ["max", "min"],
        "gen": {"temperature": 0.7, "max_length": 8, "seed": seed},
        "rihf_prompts": [{"prompt_id": "w0", "text": "Write a story."}],
        "output_dir": dir.join(id),
    });
    let path = dir.join(format!("{id}.json"));
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn model_init_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("w.bin");
    let w = weights.to_str().unwrap();
    let init: Value = serde_json::from_str(&ok(&["model", "init", "--out", w, "--seed-override", "5"])).unwrap();
    let inspect: Value = serde_json::from_str(&ok(&["model", "inspect", "--weights", w])).unwrap();
    assert_eq!(init["fingerprint"], inspect["fingerprint"]);
    assert_eq!(inspect["config"]["init_seed"], 5);
    let matrices = inspect["matrices"].as_array().unwrap();
    assert_eq!(matrices.len(), 14);
    assert_eq!(matrices[0]["matrix"], "L0_K");
    assert!(matrices.iter().all(|m| m["min"].as_f64() <= m["max"].as_f64()));
}

#[test]
fn full_command_chain_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a", 0);
    let b = write_config(dir.path(), "b", 10);
    let (ea, eb) = (dir.path().join("a"), dir.path().join("b"));
    let (ea, eb) = (ea.to_str().unwrap(), eb.to_str().unwrap());
    let report = dir.path().join("report");
    let report = report.to_str().unwrap();

    let run_all = || {
        let line: Value = serde_json::from_str(&ok(&["screen", "--config", &a, "--workers", "2"])).unwrap();
        assert_eq!(line["records"], 641);
        ok(&["--config", &b, "--workers", "3", "screen"]);
        for stage in ["map", "bias", "copa", "severity", "rihf"] {
            ok(&["analyze", stage, "--exp", ea, "--workers", "2"]);
        }
        let overlap: Value =
            serde_json::from_str(&ok(&["analyze", "overlap", "--exp", ea, "--exp", eb, "--out", report])).unwrap();
        assert_eq!(overlap["ratios"][0][0], 1.0);
        let heat = ok(&["render", "heatmap", "--exp", ea, "--scale", "2", "--svg"]);
        assert!(heat.lines().any(|l| l.ends_with("L0_Up.ppm")));
        ok(&["render", "report", "--exp", ea, "--exp", eb, "--out", report]);
        (snapshot(Path::new(ea)), snapshot(Path::new(report)))
    };
    let first = run_all();
    assert!(first.0.iter().any(|(n, _)| n == "maps.json"));
    assert!(first.0.iter().any(|(n, _)| n == "rihf_report.json"));
    assert!(first.1.iter().any(|(n, _)| n == "counts.csv"));
    let second = run_all();
    assert_eq!(first, second);
}

#[test]
fn seed_override_replaces_generation_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "s", 0);
    let out = dir.path().join("o");
    ok(&["screen", "--config", &a, "--out", out.to_str().unwrap(), "--seed-override", "42"]);
    let manifest: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["gen"]["seed"], 42);
}

#[test]
fn errors_are_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = mutascreen(&["analyze", "map", "--exp", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    let body: Value = serde_json::from_str(stderr.trim().strip_prefix("error ").unwrap()).unwrap();
    assert_eq!(body["kind"], "missing_stage");

    let out = mutascreen(&["screen"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let body: Value = serde_json::from_str(stderr.trim().strip_prefix("error ").unwrap()).unwrap();
    assert_eq!(body["kind"], "config");
}

#[test]
fn serve_speaks_ndjson() {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(env!("CARGO_BIN_EXE_mutascreen"))
        .args(["model", "serve"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    {
        let stdin = child.stdin.as_mut().unwrap();
        writeln!(stdin, r#"{{"verb":"list_matrices"}}"#).unwrap();
        writeln!(stdin, "not json").unwrap();
        writeln!(stdin, r#"{{"verb":"clear_mutation"}}"#).unwrap();
    }
    drop(child.stdin.take());
    let out = child.wait_with_output().unwrap();
    let lines: Vec<Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["ok"], true);
    assert_eq!(lines[0]["result"].as_array().unwrap().len(), 14);
    assert_eq!(lines[1]["ok"], false);
    assert_eq!(lines[1]["error"]["kind"], "protocol");
    assert_eq!(lines[2]["ok"], true);
}
