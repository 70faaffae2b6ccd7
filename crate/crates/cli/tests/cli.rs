use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_clipcurate"));
    c.env_remove("CLIPCURATE_CONFIG").env_remove("CLIPCURATE_TRIM_FRACTION");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn last_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn fixtures(dir: &Path, count: usize) -> String {
    let src = dir.join("src");
    let out = run(&["fixtures", "--out", src.to_str().unwrap(), "--count", &count.to_string()]);
    assert!(out.status.success());
    src.to_str().unwrap().to_owned()
}

const GOLDEN: &str = "tests/golden/manifest_5x7.jsonl";

#[test]
fn run_all_matches_golden_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let src = fixtures(tmp.path(), 5);
    let job = tmp.path().join("job");
    let out = run(&["run-all", "--job", job.to_str().unwrap(), &src]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = last_json(&out);
    assert_eq!(summary["ok"], true);
    assert_eq!(summary["stage"], "done");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("effective configuration"));
    assert!(stderr.contains("cutscene_threshold = 25.0"));
    let got = std::fs::read_to_string(job.join("manifest.jsonl")).unwrap();
    if std::env::var_os("CLIPCURATE_BLESS").is_some() {
        std::fs::write(GOLDEN, &got).unwrap();
    }
    assert_eq!(got, std::fs::read_to_string(GOLDEN).unwrap());
}

#[test]
fn stage_commands_compose() {
    let tmp = tempfile::tempdir().unwrap();
    let src = fixtures(tmp.path(), 2);
    let job = tmp.path().join("job");
    let j = job.to_str().unwrap();
    let out = run(&["select", "--job", j, &src]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(last_json(&out)["error"], "pipeline");
    for cmd in ["split", "caption", "select"] {
        let out = run(&[cmd, "--job", j, &src]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stdout));
    }
    assert_eq!(last_json(&run(&["run-all", "--job", j, &src]))["noop"], true);
    let stats = run(&["stats", j, "--json"]);
    assert!(stats.status.success());
    let metrics: Vec<Value> =
        String::from_utf8_lossy(&stats.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(metrics.iter().any(|m| m["metric"] == "mean_duration_s"));
}

#[test]
fn pick_teachers_example() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tmp.path().join("m.json");
    std::fs::write(
        &m,
        r#"{"video_ids":["v1","v2","v3","v4"],"model_ids":["m1","m2","m3"],
            "cells":[[true,false,false],[true,false,true],[false,true,true],[false,false,false]]}"#,
    )
    .unwrap();
    let out = run(&["pick-teachers", "--matrix", m.to_str().unwrap(), "--k", "2"]);
    assert!(out.status.success());
    let r = last_json(&out);
    assert_eq!(r["picks"], serde_json::json!(["m1", "m2"]));
    assert_eq!(r["coverage_curve"][1], 0.75);
    let out = run(&["pick-teachers", "--matrix", m.to_str().unwrap(), "--k", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_trim_fraction_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    let mut text = String::from_utf8(run(&["config"]).stdout).unwrap();
    text = text.replace("trim_fraction = 0.1", "trim_fraction = 0.6");
    std::fs::write(&cfg, text).unwrap();
    let out = run(&["split", "--config", cfg.to_str().unwrap(), "--job", "unused", "x.rvc"]);
    assert_eq!(out.status.code(), Some(2));
    let r = last_json(&out);
    assert_eq!(r["error"], "config");
    assert!(r["message"].as_str().unwrap().contains("trim_fraction"));
    let out = bin().args(["config"]).env("CLIPCURATE_TRIM_FRACTION", "0.6").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["config", "--trim_fraction", "0.2"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("trim_fraction = 0.2"));
}

#[test]
fn defaults_are_the_reference_values() {
    let text = String::from_utf8(run(&["config"]).stdout).unwrap();
    for line in [
        "cutscene_threshold = 25.0",
        "min_scene_len_frames = 15",
        "artificial_cut_seconds = 5.0",
        "consistency_max = 1.0",
        "stitch_max = 0.6",
        "motion_min = 0.15",
        "dedup_min = 0.3",
        "min_clip_seconds = 2.0",
        "max_clip_seconds = 60.0",
        "trim_fraction = 0.1",
        "gate = 0.43",
        "k = 8",
    ] {
        assert!(text.contains(line), "missing {line}");
    }
}

#[test]
fn parked_clips_make_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let src = fixtures(tmp.path(), 1);
    let mut cfg = String::from_utf8(run(&["config"]).stdout).unwrap();
    cfg = cfg.replace("\"mock:echo\"", "\"mock:dead\"").replace("\"mock:echo?colors=1\"", "\"mock:dead\"");
    let path = tmp.path().join("dead.toml");
    std::fs::write(&path, cfg).unwrap();
    let job = tmp.path().join("job");
    let args = ["run-all", "--config", path.to_str().unwrap(), "--job", job.to_str().unwrap(), &src];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(last_json(&out)["error"], "unhealthy_backends");
    let mut with_skip = args.to_vec();
    with_skip.push("--skip-health");
    let out = run(&with_skip);
    assert_eq!(out.status.code(), Some(1));
    let r = last_json(&out);
    assert_eq!(r["ok"], false);
    assert!(r["parked"].as_u64().unwrap() > 0);
}

#[test]
fn missing_inputs() {
    let out = run(&["run-all", "--job", "/tmp/none"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(last_json(&out)["error"], "missing_inputs");
}
