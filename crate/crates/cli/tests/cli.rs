use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cr-yamabe"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn check_status<'a>(m: &'a Value, name: &str) -> &'a str {
    m["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()["status"].as_str().unwrap()
}

fn outputs_exist(dir: &Path, m: &Value) {
    for f in m["outputs"].as_array().unwrap() {
        assert!(dir.join(f.as_str().unwrap()).exists(), "{f}");
    }
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let p = dir.join("flow.json");
    let text = format!(
        r#"{{"grid":{{"n_eta":8,"n_xi1":8,"n_xi2":8}},"initial":{{"a":[0.1,0.0],"b":[0.05,0.0],"c":[1.0,0.0]}},
            "t_end":0.06,"t_min":0.01,"snapshots_every":0.02,"trace_every":10{extra}}}"#
    );
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn flow_pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("out");
    let o = run(&["--threads", "1", "run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    for f in ["trace.csv", "harnack.csv", "run.json", "manifest.json", "snapshots/index.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,dt,min_W,max_W,min_Y,"));
    let m = manifest(&out);
    outputs_exist(&out, &m);
    assert_eq!(check_status(&m, "min_w_nondecreasing"), "pass");
    assert_eq!(m["terminal"]["kind"], "completed");
    assert_eq!(m["threads"], 1);

    let o = run(&["harnack-monitor", "--run", out.to_str().unwrap(), "--samples", "10"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));

    let pairs = tmp.path().join("pairs.json");
    std::fs::write(
        &pairs,
        r#"[{"x1":[[0.6,0.0],[0.0,0.8]],"t1":0.02,"x2":[[0.6,0.0],[0.0,0.8]],"t2":0.04},
            {"x1":[[0.6,0.0],[0.0,0.8]],"t1":0.02,"x2":[[0.0,0.6],[0.8,0.0]],"t2":0.06}]"#,
    )
    .unwrap();
    let o = run(&["path-action", "--pairs", pairs.to_str().unwrap(), "--run", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let paths = std::fs::read_to_string(out.join("paths.csv")).unwrap();
    assert_eq!(paths.lines().count(), 3);

    let m = manifest(&out);
    outputs_exist(&out, &m);
    assert_eq!(check_status(&m, "integrated_harnack"), "pass");
    assert_eq!(check_status(&m, "quadratic_dominance"), "pass");

    let o = run(&["report", "--run", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("harnack_min_y") && text.contains("completed at t = 0.06"), "{text}");
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let traces: Vec<String> = ["a", "b"]
        .iter()
        .map(|d| {
            let out = tmp.path().join(d);
            let o = run(&["--threads", "1", "run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
            assert_eq!(code(&o), 0);
            std::fs::read_to_string(out.join("trace.csv")).unwrap()
        })
        .collect();
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn blowup_is_a_numerical_exit_and_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#","w_cap":1.05"#);
    let out = tmp.path().join("out");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let m = manifest(&out);
    assert_eq!(m["terminal"]["kind"], "w_cap_exceeded");
    outputs_exist(&out, &m);
    let o = run(&["report", "--run", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let text = stdout(&o);
    assert!(text.contains("w_cap_exceeded") && text.contains("last valid t"), "{text}");
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["report", "--run", tmp.path().to_str().unwrap()])), 2);
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"grid":{"n_eta":3,"n_xi1":8,"n_xi2":8},"initial":{"a":[0,0],"b":[0,0],"c":[1,0]},"t_end":0.1}"#).unwrap();
    let o = run(&["run", "--config", bad.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_eta"));
    let o = run(&["verify-initial-data", "--grid", "8,8,8", "--a", "1", "--c", "0.5"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn operator_and_initial_data_suites() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["verify-operators", "--grid", "16,16,16", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(check_status(&manifest(tmp.path()), "sublaplacian_re_z1"), "pass");

    let o = run(&["verify-initial-data", "--grid", "12,12,12"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("printed_curvature_formula        not run"));

    // the closed form printed alongside the data disagrees with the computed curvature
    let dir = tmp.path().join("printed");
    let o = run(&["verify-initial-data", "--grid", "12,12,12", "--printed-formula", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let m = manifest(&dir);
    assert_eq!(check_status(&m, "printed_curvature_formula"), "fail");
    assert_eq!(check_status(&m, "exact_constant_curvature"), "pass");
}
