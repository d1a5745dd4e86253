use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn geoknit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoknit")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = geoknit(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn split_sample(sample: &Path, dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(sample).unwrap()).unwrap();
    let a = dir.join("cond.json");
    let b = dir.join("target.json");
    fs::write(&a, v["condition"].to_string()).unwrap();
    fs::write(&b, v["target"].to_string()).unwrap();
    (a, b)
}

#[test]
fn malformed_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let out = geoknit(&["annotate", "--pair", s(&bad), s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let out = geoknit(&["synth-data", "--out", s(dir.path()), "--families", "teapot"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(geoknit(&["sample", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn annotate_finds_peg_contacts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth-data", "--families", "peg_socket", "--count", "1", "--out", s(&data), "--seed", "3"]);
    let (a, b) = split_sample(&data.join("sample_00000.json"), dir.path());
    let out = geoknit(&["annotate", "--pair", s(&a), s(&b)]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!report["pairs"].as_array().unwrap().is_empty());
}

#[test]
fn pipeline_runs_end_to_end_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    ok(&["synth-data", "--families", "peg_socket,flange_ring", "--count", "3", "--out", s(&p("data")), "--seed", "1"]);
    assert_eq!(fs::read_dir(p("data")).unwrap().count(), 3);

    ok(&["train", "--data", s(&p("data")), "--out", s(&p("model.json")), "--epochs", "1", "--timesteps", "200"]);
    let log = fs::read_to_string(p("model.json.loss.csv")).unwrap();
    assert_eq!(log.lines().count(), 2);

    let sample = |out: &str, trace: &str, guided: bool| {
        let (m, c, o, t) = (p("model.json"), p("data"), p(out), p(trace));
        let mut args = vec!["sample", "--model", s(&m), "--cond", s(&c), "--out", s(&o), "--trace", s(&t), "--seed", "5"];
        if guided {
            args.push("--guided");
        }
        ok(&args);
    };
    sample("gen", "trace.jsonl", true);
    sample("gen2", "trace2.jsonl", true);
    sample("plain", "plain.jsonl", false);

    assert_eq!(fs::read_to_string(p("trace.jsonl")).unwrap().lines().count(), 3 * 4);
    assert_eq!(fs::read_to_string(p("plain.jsonl")).unwrap(), "");
    assert_eq!(fs::read(p("trace.jsonl")).unwrap(), fs::read(p("trace2.jsonl")).unwrap());
    for f in fs::read_dir(p("gen")).unwrap() {
        let f = f.unwrap().path();
        assert_eq!(fs::read(&f).unwrap(), fs::read(p("gen2").join(f.file_name().unwrap())).unwrap());
    }

    ok(&["evaluate", "--gen", s(&p("gen")), "--ref", s(&p("data")), "--out", s(&p("report.json"))]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("report.json")).unwrap()).unwrap();
    assert!(report.is_object());
    assert!(fs::read_to_string(p("report.csv")).unwrap().lines().count() >= 2);

    ok(&["heatmap", "--models", s(&p("gen")), "--out", s(&p("heat.svg"))]);
    assert!(fs::read_to_string(p("heat.svg")).unwrap().starts_with("<svg"));
}
