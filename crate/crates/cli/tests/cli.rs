use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fanfire(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fanfire"))
        .args(args)
        .env_remove("FANFIRE_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: stdout={} stderr={}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

const COORD2: &str = r#"{"n":2,"normals":[["1","0"],["0","1"]]}"#;
const BRAID3: &str = r#"{"n":3,"normals":[["1","-1","0"],["1","0","-1"],["0","1","-1"]]}"#;
const BRAID3_S3: &str = r#"{"m":3,"generators":[
    {"sigma":[2,1,0],"eps":[-1,-1,-1]},
    {"sigma":[0,2,1],"eps":[-1,1,1]}]}"#;

#[test]
fn coordinate_plane_has_four_chambers() {
    let dir = TempDir::new().unwrap();
    let arr = write(&dir, "a.json", COORD2);
    let out = fanfire(&["traverse", s(&arr), "--workers", "2"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let states: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["state"].as_str().unwrap()).collect();
    assert_eq!(states, ["++", "+-", "-+", "--"]);
}

#[test]
fn braid_with_group_sums_to_six() {
    let dir = TempDir::new().unwrap();
    let arr = write(&dir, "a.json", BRAID3);
    let grp = write(&dir, "g.json", BRAID3_S3);
    let res = dir.path().join("out.json");
    let out = fanfire(&["traverse", s(&arr), "--group", s(&grp), "--out", s(&res)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(res).unwrap()).unwrap();
    let total: u64 = v.as_array().unwrap().iter().map(|r| r["orbit_size"].as_u64().unwrap()).sum();
    assert_eq!(total, 6);
}

#[test]
fn symmetry_violation_exits_3() {
    let dir = TempDir::new().unwrap();
    let arr = write(&dir, "a.json", BRAID3);
    let grp = write(&dir, "g.json", r#"{"m":3,"generators":[{"sigma":[2,1,0],"eps":[-1,1,-1]}]}"#);
    let out = fanfire(&["traverse", s(&arr), "--group", s(&grp)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("generator 0"));
}

#[test]
fn parse_failures_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "a.json", r#"{"n":1,"normals":[["1/0"]]}"#);
    let out = fanfire(&["traverse", s(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero denominator"));
    assert_eq!(code(&fanfire(&["traverse", "/nonexistent.json"])), 2);
    let arr = write(&dir, "c.json", COORD2);
    let grp = write(&dir, "g.json", r#"{"m":2,"generators":[{"sigma":[0,0],"eps":[1,1]}]}"#);
    assert_eq!(code(&fanfire(&["traverse", s(&arr), "--group", s(&grp)])), 2);
    assert_eq!(code(&fanfire(&["traverse", s(&arr), "--workers", "0"])), 2);
}

#[test]
fn circle_is_smooth() {
    let dir = TempDir::new().unwrap();
    let f = write(
        &dir,
        "f.json",
        r#"[{"coeff":"1","xexp":2,"yexp":0},{"coeff":"1","xexp":0,"yexp":2},{"coeff":"-1","xexp":0,"yexp":0}]"#,
    );
    let out = fanfire(&["smooth", s(&f)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["verdict"], "smooth");
}

#[test]
fn cusp_is_singular_at_zero() {
    let dir = TempDir::new().unwrap();
    let f = write(
        &dir,
        "f.json",
        r#"[{"coeff":"1","xexp":0,"yexp":2},{"coeff":"-1","xexp":3,"yexp":0}]"#,
    );
    let out = fanfire(&["smooth", s(&f)]);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "singular");
    assert_eq!(v["witness"]["certificate"]["a"], "0");
}

#[test]
fn irrational_candidates_exit_4() {
    let dir = TempDir::new().unwrap();
    // y^2 - (x^2 - 2)^2
    let f = write(
        &dir,
        "f.json",
        r#"[{"coeff":"1","xexp":0,"yexp":2},{"coeff":"-1","xexp":4,"yexp":0},
            {"coeff":"4","xexp":2,"yexp":0},{"coeff":"-4","xexp":0,"yexp":0}]"#,
    );
    let out = fanfire(&["smooth", s(&f)]);
    assert_eq!(code(&out), 4);
    assert_eq!(stdout_json(&out)["verdict"], "indeterminate");
}

#[test]
fn non_squarefree_polynomial_is_rejected() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.json", r#"[{"coeff":"1","xexp":0,"yexp":2}]"#);
    assert_eq!(code(&fanfire(&["smooth", s(&f)])), 2);
}

#[test]
fn synthetic_singular_tree_reports_partial_evaluation() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        &dir,
        "t.json",
        r#"{"seed":4,"branching":3,"depth":4,"cost_ms":1,"cost_mode":"sleep","singular_leaves":["0.0.0.0"]}"#,
    );
    let out = fanfire(&["smooth", s(&spec), "--workers", "4"]);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["witness"]["chart"], "0.0.0.0");
    assert!(v["charts_evaluated"].as_u64().unwrap() < v["charts_total"].as_u64().unwrap());
    assert_eq!(v["charts_total"], 121);
}

#[test]
fn workers_from_environment() {
    let dir = TempDir::new().unwrap();
    let arr = write(&dir, "a.json", COORD2);
    let out = Command::new(env!("CARGO_BIN_EXE_fanfire"))
        .args(["traverse", s(&arr)])
        .env("FANFIRE_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn fresh_trace_replays_and_truncated_trace_fails() {
    let dir = TempDir::new().unwrap();
    let arr = write(&dir, "a.json", BRAID3);
    let trace = dir.path().join("run.jsonl");
    let out = fanfire(&["traverse", s(&arr), "--workers", "3", "--trace", s(&trace)]);
    assert_eq!(code(&out), 0);
    let net = dir.path().join("run.jsonl.net.json");
    let init = dir.path().join("run.jsonl.initial.json");
    assert_eq!(code(&fanfire(&["replay", s(&net), s(&init), s(&trace)])), 0);

    let text = std::fs::read_to_string(&trace).unwrap();
    let cut = write(&dir, "cut.jsonl", &text[..text.len() / 2]);
    let fin = dir.path().join("run.jsonl.final.json");
    let out = fanfire(&["replay", s(&net), s(&init), s(&cut), "--final", s(&fin)]);
    assert_eq!(code(&out), 5);

    // Whole lines dropped: parses, but the marking no longer matches.
    let lines: Vec<&str> = text.lines().collect();
    let short = write(&dir, "short.jsonl", &(lines[..lines.len() - 2].join("\n") + "\n"));
    let out = fanfire(&["replay", s(&net), s(&init), s(&short), "--final", s(&fin)]);
    assert_eq!(code(&out), 5);
}

#[test]
fn different_seed_matches_up_to_canonical_marking() {
    let dir = TempDir::new().unwrap();
    let arr = write(&dir, "a.json", BRAID3);
    let t1 = dir.path().join("one.jsonl");
    let t2 = dir.path().join("two.jsonl");
    assert_eq!(code(&fanfire(&["traverse", s(&arr), "--seed", "1", "--workers", "2", "--trace", s(&t1)])), 0);
    assert_eq!(code(&fanfire(&["traverse", s(&arr), "--seed", "2", "--workers", "2", "--trace", s(&t2)])), 0);
    let out = fanfire(&[
        "replay",
        s(&dir.path().join("two.jsonl.net.json")),
        s(&dir.path().join("two.jsonl.initial.json")),
        s(&t2),
        "--final",
        s(&dir.path().join("one.jsonl.final.json")),
        "--canonical",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn smoothness_trace_replays() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "t.json", r#"{"seed":1,"branching":2,"depth":3,"singular_leaves":["1.0.1"]}"#);
    let trace = dir.path().join("s.jsonl");
    assert_eq!(code(&fanfire(&["smooth", s(&spec), "--workers", "2", "--trace", s(&trace)])), 1);
    let out = fanfire(&[
        "replay",
        s(&dir.path().join("s.jsonl.net.json")),
        s(&dir.path().join("s.jsonl.initial.json")),
        s(&trace),
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn failure_injection_flag_keeps_results() {
    let dir = TempDir::new().unwrap();
    let arr = write(&dir, "a.json", BRAID3);
    let clean = fanfire(&["traverse", s(&arr)]);
    let noisy = fanfire(&["traverse", s(&arr), "--inject-failures", "0.2", "--max-retries", "50", "--seed", "3"]);
    assert_eq!(code(&noisy), 0);
    assert_eq!(stdout_json(&clean), stdout_json(&noisy));
    assert_eq!(code(&fanfire(&["traverse", s(&arr), "--inject-failures", "1.5"])), 2);
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("workers,rep,wall_ms,firings,speedup"));
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn bench_rows_and_speedups() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "t.json", r#"{"seed":1,"branching":2,"depth":3,"cost_ms":0.2}"#);
    let out = fanfire(&["bench", s(&spec), "--workers", "1", "--reps", "3"]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&String::from_utf8_lossy(&out.stdout));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[0] == "1" && r[4] == "1.000"));

    let csv = dir.path().join("b.csv");
    let graph = write(&dir, "g.json", r#"{"nodes":40,"extra_edges":30,"seed":2}"#);
    let out = fanfire(&["bench", s(&graph), "--workers", "2,4", "--reps", "2", "--out", s(&csv)]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    let counts: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(counts, ["1", "1", "2", "2", "4", "4"]);
    let firings: Vec<&str> = rows.iter().map(|r| r[3].as_str()).collect();
    assert!(firings.windows(2).all(|w| w[0] == w[1]));
}
