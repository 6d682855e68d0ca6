use std::path::Path;
use std::process::{Command, Output};

fn cobev(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cobev")).current_dir(dir).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) {
    std::fs::write(dir.join("c.json"), body).unwrap();
}

const SMALL: &str = r#"{"synth": {"episodes": 12}, "policies": ["ego", "ego_concern"], "n_available": [2], "augment": {}}"#;

#[test]
fn synth_is_deterministic_and_follows_the_track_schema() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), SMALL);
    for out in ["a", "b"] {
        let o = cobev(tmp.path(), &["--config", "c.json", "--seed", "4", "--out", out, "synth"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read_to_string(tmp.path().join("a/tracks.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(tmp.path().join("b/tracks.csv")).unwrap());
    assert_eq!(a.lines().next().unwrap(), "track_id,frame,kind,x,y,theta,speed,length,width");
}

#[test]
fn slice_assess_augment_and_histogram_write_their_files() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), SMALL);
    for cmd in ["slice", "assess", "augment", "histogram"] {
        let o = cobev(tmp.path(), &["--config", "c.json", "--jobs", "2", cmd]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let out = tmp.path().join("out");
    let manifests: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("scenarios.json")).unwrap()).unwrap();
    assert_eq!(manifests.as_array().unwrap().len(), 12);
    let cands = std::fs::read_to_string(out.join("candidates/scenario_0.csv")).unwrap();
    assert_eq!(cands.lines().next().unwrap(), "candidate_id,step,x,y,theta");
    assert_eq!(cands.lines().count(), 1 + 64 * 10);
    let hist = std::fs::read_to_string(out.join("histogram_seed.csv")).unwrap();
    assert_eq!(hist.lines().next().unwrap(), "colliding_count,scenarios");
    let total: usize = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 12);
    for f in ["criticality.json", "histogram.png", "histogram_augmented.png", "augmented.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn evaluate_writes_metrics_logs_and_renders() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), &SMALL.replace("\"augment\": {}", "\"augment\": {}, \"render\": true"));
    let o = cobev(tmp.path(), &["--config", "c.json", "evaluate"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("out");
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "policy,n_available,k,collision_rate_pct,rel_to_ego_pct,avg_links,avg_bytes");
    // two policies, one budget, k = 1 and 10
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("ego,2,1,"));
    assert!(out.join("logs/ego_concern_n2.json").is_file());
    assert!(out.join("run.json").is_file());
    let renders = std::fs::read_dir(out.join("render")).unwrap().count();
    assert!(renders >= 4);
}

#[test]
fn minimal_run_has_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), r#"{"policies": ["ego"], "n_available": [1], "k_values": [1]}"#);
    let o = cobev(tmp.path(), &["--config", "c.json", "evaluate"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(tmp.path().join("out/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
}

#[test]
fn schema_errors_report_the_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), r#"{"windows": {"obs_s": "long"}}"#);
    let o = cobev(tmp.path(), &["--config", "c.json", "evaluate"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("windows.obs_s"));
    let o = cobev(tmp.path(), &["--config", "missing.json", "evaluate"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
    write_config(tmp.path(), r#"{"tracks": "nowhere.csv"}"#);
    let o = cobev(tmp.path(), &["--config", "c.json", "slice"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.csv"));
}

#[test]
fn tracks_round_trip_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), r#"{"synth": {"episodes": 3}}"#);
    assert!(cobev(tmp.path(), &["--config", "c.json", "--out", "s", "synth"]).status.success());
    write_config(tmp.path(), r#"{"tracks": "s/tracks.csv"}"#);
    let o = cobev(tmp.path(), &["--config", "c.json", "--out", "t", "slice"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("t/scenarios.json")).unwrap()).unwrap();
    assert_eq!(m.as_array().unwrap().len(), 3);
    assert_eq!(m[0]["source"], "s/tracks.csv");
}
