use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn wpme(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wpme"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    std::fs::write(dir.join(name), serde_json::to_string_pretty(v).unwrap()).unwrap();
    name.to_string()
}

fn unit_weight() -> Value {
    json!({"family": "power", "beta": 0, "domain": {"left": 0, "right": 1}})
}

fn neumann_problem(datum: Value) -> Value {
    json!({
        "m": 2.0,
        "bc": "neumann",
        "nu": unit_weight(),
        "mu": unit_weight(),
        "domain": {"left": 0, "right": 1},
        "datum": datum
    })
}

fn solve_config(datum: Value) -> Value {
    json!({
        "command": "solve",
        "problem": neumann_problem(datum),
        "cells": 64,
        "times": {"spacing": "log", "start": 0.001, "end": 0.5, "count": 12}
    })
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (h, rows) = read_csv(path);
    let i = h.iter().position(|c| c == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

/// Relative path to contents of every file below `root`.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn manifest(root: &Path) -> (BTreeMap<String, String>, BTreeMap<PathBuf, u64>) {
    let text = std::fs::read_to_string(root.join("MANIFEST")).unwrap();
    let mut head = BTreeMap::new();
    let mut files = BTreeMap::new();
    for line in text.lines() {
        let parts: Vec<&str> = line.split('\t').collect();
        if parts[0] == "file" {
            files.insert(PathBuf::from(parts[1]), parts[2].parse().unwrap());
        } else {
            head.insert(parts[0].to_string(), parts[1..].join("\t"));
        }
    }
    (head, files)
}

fn assert_manifest_complete(root: &Path) {
    let (head, files) = manifest(root);
    assert_eq!(head["complete"], "true");
    let mut on_disk = snapshot(root);
    on_disk.remove(Path::new("MANIFEST"));
    let listed: Vec<&PathBuf> = files.keys().collect();
    assert_eq!(listed, on_disk.keys().collect::<Vec<_>>());
    for (p, bytes) in &files {
        assert_eq!(*bytes, on_disk[p].len() as u64, "{}", p.display());
    }
}

#[test]
fn audit_of_a_holding_entry_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let o = wpme(
        &[
            "audit",
            "--entry",
            "power beta=3 halfline dirichlet",
            "--out",
            "a",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep: Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("a/report.json")).unwrap()).unwrap();
    assert_eq!(rep["verdicts"]["dirichlet"], "holds");
    assert_manifest_complete(&tmp.path().join("a"));
}

#[test]
fn failing_inequality_still_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "audit.json",
        &json!({"command": "audit", "entry": "lebesgue halfline dirichlet", "out": "b"}),
    );
    let o = wpme(&["audit", "--config", &cfg], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("dirichlet fails"));
    let rep: Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("b/report.json")).unwrap()).unwrap();
    assert_eq!(rep["verdicts"]["dirichlet"], "fails");
}

#[test]
fn explicit_pair_audit() {
    let tmp = TempDir::new().unwrap();
    let d = json!({"left": 0, "right": "inf"});
    let cfg = write_config(
        tmp.path(),
        "pair.json",
        &json!({
            "command": "audit",
            "name": "x^1, x^3",
            "nu": {"family": "power", "beta": 1.0, "domain": d},
            "mu": {"family": "power", "beta": 3.0, "domain": d},
            "kinds": ["dirichlet"]
        }),
    );
    let o = wpme(&["audit", "--config", &cfg, "--out", "p"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep: Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("p/report.json")).unwrap()).unwrap();
    assert_eq!(rep["verdicts"]["dirichlet"], "holds");
    assert!(rep["verdicts"]["zero_mean"].is_null());
}

#[test]
fn inconclusive_verdict_exits_two() {
    let tmp = TempDir::new().unwrap();
    let unit = json!({"left": 0, "right": 1});
    let cfg = write_config(
        tmp.path(),
        "sign.json",
        &json!({
            "command": "audit",
            "nu": unit_weight(),
            "mu": {"family": "sampled", "x": [0.0, 0.5, 1.0], "value": [1.0, -1.0, 1.0], "domain": unit}
        }),
    );
    let o = wpme(&["audit", "--config", &cfg, "--out", "i"], tmp.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let rep: Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("i/report.json")).unwrap()).unwrap();
    assert_eq!(rep["verdicts"]["dirichlet"], "inconclusive");
    assert_manifest_complete(&tmp.path().join("i"));
}

#[test]
fn config_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("broken.json"), "{\"command\": \"audit\", ").unwrap();
    let cases = [
        ("broken.json", "audit"),
        (
            &*write_config(
                tmp.path(),
                "extra.json",
                &json!({"command": "audit", "entry": "x", "colour": 1}),
            ),
            "audit",
        ),
        (
            &*write_config(tmp.path(), "other.json", &json!({"command": "fit"})),
            "audit",
        ),
        ("missing.json", "audit"),
    ];
    for (file, cmd) in cases {
        let o = wpme(&[cmd, "--config", file, "--out", "e"], tmp.path());
        assert_eq!(code(&o), 1, "{file}");
        assert!(
            String::from_utf8_lossy(&o.stderr).starts_with("error:"),
            "{file}"
        );
    }
    assert_eq!(code(&wpme(&["audit", "--bogus-flag"], tmp.path())), 1);
    assert_eq!(code(&wpme(&["--help"], tmp.path())), 0);
    let o = wpme(
        &["audit", "--entry", "no such entry", "--out", "e"],
        tmp.path(),
    );
    assert_eq!(code(&o), 1);
    let (head, _) = manifest(&tmp.path().join("e"));
    assert_eq!(head["complete"], "false");
    assert!(head["error"].contains("no such entry"));
}

#[test]
fn ar81_scenario_decays_like_inverse_time() {
    let tmp = TempDir::new().unwrap();
    let o = wpme(&["scenario", "ar81", "--m", "2", "--out", "s"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("s/verdict.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    let p = v["fits"]["norm2"]["exponent"].as_f64().unwrap();
    assert!((p + 1.0).abs() <= 0.1, "{p}");
    assert_manifest_complete(&tmp.path().join("s"));
}

#[test]
fn unknown_scenario_is_an_error() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(
        code(&wpme(&["scenario", "nope", "--out", "s"], tmp.path())),
        1
    );
}

#[test]
fn constant_neumann_datum_keeps_norms() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &solve_config(json!({"kind": "constant", "value": 0.7})),
    );
    let o = wpme(&["solve", "--config", &cfg, "--out", "c"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = tmp.path().join("c/summary.csv");
    for name in ["norm1", "norm2", "normq", "normInf", "mean"] {
        let col = column(&summary, name);
        assert_eq!(col.len(), 13);
        for v in &col {
            assert!((v - 0.7).abs() <= 1e-12, "{name}: {v}");
        }
    }
    assert_manifest_complete(&tmp.path().join("c"));
}

#[test]
fn solve_writes_bound_reports() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = solve_config(json!({"kind": "cospi", "offset": 1.0, "amplitude": 0.5}));
    cfg["bounds"] = json!([
        {"bound": "neumann_smoothing_sum", "params": {"m": 2.0, "q0": 1.0, "rho": 2.0}},
        {"bound": "mean_convergence", "params": {"m": 2.0, "q0": 1.0, "rho": 2.0}}
    ]);
    let cfg = write_config(tmp.path(), "b.json", &cfg);
    let o = wpme(&["solve", "--config", &cfg, "--out", "b"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = read_csv(&tmp.path().join("b/bounds.csv"));
    assert_eq!(h[0], "bound");
    assert_eq!(rows.len(), 2);
    for tag in ["neumann_smoothing_sum", "mean_convergence"] {
        let p = tmp.path().join(format!("b/bound_{tag}.json"));
        let r: Value = serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap();
        assert_eq!(r["bound"], tag);
        assert!(r["fitted_constant"].as_f64().unwrap() > 0.0);
    }
    assert_manifest_complete(&tmp.path().join("b"));
}

#[test]
fn solver_failure_keeps_partial_outputs() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = solve_config(json!({"kind": "cospi", "offset": 1.0, "amplitude": 0.9}));
    cfg["problem"]["time"] =
        json!({"dt_init": 0.05, "fixed": true, "max_newton": 1, "max_halvings": 0});
    let cfg = write_config(tmp.path(), "f.json", &cfg);
    let o = wpme(&["solve", "--config", &cfg, "--out", "f"], tmp.path());
    assert_eq!(code(&o), 1);
    let root = tmp.path().join("f");
    let (head, files) = manifest(&root);
    assert_eq!(head["complete"], "false");
    for f in ["trajectory.csv", "summary.csv", "run.json"] {
        assert!(files.contains_key(Path::new(f)), "{f}");
    }
    let run: Value =
        serde_json::from_slice(&std::fs::read(root.join("run.json")).unwrap()).unwrap();
    assert!(run["error"].is_string());
}

fn sweep_config() -> Value {
    json!({
        "command": "sweep",
        "base": {
            "problem": neumann_problem(json!({"kind": "cospi", "offset": 1.0, "amplitude": 0.5})),
            "cells": 100,
            "times": [0.01, 0.05]
        },
        "parameters": [
            {"path": "problem.m", "values": [2.0, 3.0]},
            {"path": "cells", "values": [200, 400]}
        ]
    })
}

#[test]
fn sweep_writes_one_index_row_per_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.json", &sweep_config());
    let o = wpme(
        &["sweep", "--config", &cfg, "--out", "s", "--jobs", "2"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let root = tmp.path().join("s");
    let (h, rows) = read_csv(&root.join("index.csv"));
    assert_eq!(h[..5], ["run", "dir", "problem.m", "cells", "status"]);
    assert_eq!(rows.len(), 4);
    let combos: Vec<(&str, &str)> = rows
        .iter()
        .map(|r| (r[2].as_str(), r[3].as_str()))
        .collect();
    assert_eq!(
        combos,
        [
            ("2.0", "200"),
            ("2.0", "400"),
            ("3.0", "200"),
            ("3.0", "400")
        ]
    );
    for r in &rows {
        assert_eq!(r[4], "ok");
        let run: Value =
            serde_json::from_slice(&std::fs::read(root.join(&r[1]).join("run.json")).unwrap())
                .unwrap();
        assert_eq!(run["cells"].to_string(), r[3]);
        // mass is conserved under zero flux
        let mean: f64 = r[9].parse().unwrap();
        assert!((mean - 1.0).abs() < 1e-9);
    }
    assert_manifest_complete(&root);
}

#[test]
fn sweep_rejects_bad_runs_before_solving() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = sweep_config();
    cfg["parameters"][0]["values"] = json!([2.0, "two"]);
    let cfg = write_config(tmp.path(), "bad.json", &cfg);
    let o = wpme(&["sweep", "--config", &cfg, "--out", "s"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(!tmp.path().join("s/run_000").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.json", &sweep_config());
    let solve = write_config(
        tmp.path(),
        "c.json",
        &solve_config(json!({"kind": "log1p"})),
    );
    for (jobs, dir) in [("1", "r1"), ("3", "r2")] {
        let o = wpme(
            &[
                "sweep",
                "--config",
                &cfg,
                "--out",
                &format!("{dir}/sweep"),
                "--jobs",
                jobs,
            ],
            tmp.path(),
        );
        assert_eq!(code(&o), 0);
        let o = wpme(
            &[
                "solve",
                "--config",
                &solve,
                "--out",
                &format!("{dir}/solve"),
            ],
            tmp.path(),
        );
        assert_eq!(code(&o), 0);
        let o = wpme(
            &[
                "scenario",
                "mean_convergence",
                "--cells",
                "64",
                "--out",
                &format!("{dir}/scen"),
            ],
            tmp.path(),
        );
        assert_eq!(code(&o), 0);
    }
    let a = snapshot(&tmp.path().join("r1"));
    let b = snapshot(&tmp.path().join("r2"));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(v == &b[k], "{} differs", k.display());
    }
}

#[test]
fn fit_recovers_a_power_law() {
    let tmp = TempDir::new().unwrap();
    let mut csv = String::from("t,y\n");
    for k in 0..30 {
        let t = 10f64.powf(-2.0 + 3.0 * k as f64 / 29.0);
        csv.push_str(&format!("{t},{}\n", 3.0 * t.powf(-0.75)));
    }
    std::fs::write(tmp.path().join("series.csv"), csv).unwrap();
    let o = wpme(
        &[
            "fit",
            "--series",
            "series.csv",
            "--form",
            "power",
            "--column",
            "y",
            "--window",
            "0.01,10",
            "--out",
            "f",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let f: Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("f/fit.json")).unwrap()).unwrap();
    assert!((f["fit"]["exponent"].as_f64().unwrap() + 0.75).abs() < 1e-12);
    assert!((f["fit"]["constant"].as_f64().unwrap() - 3.0).abs() < 1e-11);
    let o = wpme(
        &[
            "fit",
            "--series",
            "series.csv",
            "--form",
            "power",
            "--column",
            "z",
            "--out",
            "g",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn documented_examples_run() {
    let tmp = TempDir::new().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples");
    // the fit example reads a summary written by the sweep example
    let order = [
        "audit_entry",
        "audit_pair",
        "solve_neumann",
        "scenario_ar81",
        "sweep",
        "fit",
    ];
    for name in order {
        let file = format!("{name}.json");
        std::fs::copy(src.join(&file), tmp.path().join(&file)).unwrap();
        let cfg: Value =
            serde_json::from_slice(&std::fs::read(tmp.path().join(&file)).unwrap()).unwrap();
        let cmd = cfg["command"].as_str().unwrap();
        let o = wpme(&[cmd, "--config", &file], tmp.path());
        assert_eq!(
            code(&o),
            0,
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert_manifest_complete(&tmp.path().join(cfg["out"].as_str().unwrap()));
    }
    let listed = std::fs::read_dir(&src).unwrap().count();
    assert_eq!(listed, order.len());
}
