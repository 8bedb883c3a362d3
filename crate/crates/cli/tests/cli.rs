use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn edgecurve(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgecurve"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = edgecurve(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// A temp dir holding `box.ply` and `cyl.ply` with ground truth.
fn scenes() -> TempDir {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--out", "s", "--stem", "box", "--seed", "3"]);
    ok(
        d,
        &["synth", "--out", "s", "--stem", "cyl", "--kind", "cylinder_union", "--lines", "0", "--circles", "2", "--seed", "4"],
    );
    dir
}

const PIPE: [&str; 8] = ["pipeline", "--in", "s/box.ply", "--gt", "s/box.gt.json", "--scorer", "oracle", "--out"];

#[test]
fn pipeline_writes_curves_and_report() {
    let dir = scenes();
    let d = dir.path();
    let mut args = PIPE.to_vec();
    args.extend(["curves.json", "--report", "report.json", "--export-obj", "curves.obj"]);
    ok(d, &args);
    let curves: serde_json::Value = serde_json::from_slice(&fs::read(d.join("curves.json")).unwrap()).unwrap();
    assert_eq!(curves["curves"].as_array().unwrap().len(), 12);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["recovered_curves"], 12);
    assert!(report["ecd"].as_f64().unwrap() < 1e-3);
    let obj = fs::read_to_string(d.join("curves.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 12 * 64);
    assert_eq!(obj.lines().filter(|l| l.starts_with("l ")).count(), 12);
}

#[test]
fn runs_are_byte_identical() {
    let dir = scenes();
    let d = dir.path();
    let mut a = PIPE.to_vec();
    a.extend(["a.json", "--seed", "9"]);
    let mut b = vec!["--workers", "1"];
    b.extend(&PIPE);
    b.extend(["b.json", "--seed", "9"]);
    ok(d, &a);
    ok(d, &b);
    assert_eq!(fs::read(d.join("a.json")).unwrap(), fs::read(d.join("b.json")).unwrap());
}

#[test]
fn select_on_dumped_proposals_matches_pipeline() {
    let dir = scenes();
    let d = dir.path();
    let mut args = PIPE.to_vec();
    args.extend(["curves.json", "--dump-dir", "dump"]);
    ok(d, &args);
    for f in ["scores.ecsc", "detection.json", "proposals.jsonl"] {
        assert!(d.join("dump").join(f).is_file(), "{f}");
    }
    ok(d, &["select", "--proposals", "dump/proposals.jsonl", "--out", "again.json"]);
    assert_eq!(fs::read(d.join("curves.json")).unwrap(), fs::read(d.join("again.json")).unwrap());

    ok(
        d,
        &["propose", "--in", "s/box.ply", "--gt", "s/box.gt.json", "--scorer", "oracle", "--out", "p.jsonl"],
    );
    assert_eq!(fs::read(d.join("p.jsonl")).unwrap(), fs::read(d.join("dump/proposals.jsonl")).unwrap());
}

#[test]
fn missing_input_exits_2_without_outputs() {
    let dir = scenes();
    let d = dir.path();
    let out = edgecurve(
        d,
        &["pipeline", "--in", "nope.ply", "--scorer", "covariance", "--out", "c.json", "--export-obj", "c.obj"],
    );
    assert_eq!(code(&out), 2);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    let out = edgecurve(
        d,
        &["pipeline", "--in", "s/box.ply", "--gt", "missing.json", "--out", "c.json", "--report", "r.json"],
    );
    assert_eq!(code(&out), 2);
    let left: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec![std::ffi::OsString::from("s")]);
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&edgecurve(d, &[])), 2);
    assert_eq!(code(&edgecurve(d, &["pipeline", "--tau-e", "abc"])), 2);
    assert_eq!(code(&edgecurve(d, &["pipeline", "--print-config", "--tau-e", "1.5"])), 2);
    fs::write(d.join("bad.cfg"), "detection.nonsense=1\n").unwrap();
    assert_eq!(code(&edgecurve(d, &["pipeline", "--print-config", "--config", "bad.cfg"])), 2);
    // The oracle scorer cannot run without ground truth.
    ok(d, &["synth", "--out", "s", "--stem", "box"]);
    let out = edgecurve(d, &["pipeline", "--in", "s/box.ply", "--scorer", "oracle", "--out", "c.json"]);
    assert_eq!(code(&out), 2);
    assert!(!d.join("c.json").exists());
}

#[test]
fn print_config_resolves_file_then_flags() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("run.cfg"), "# sweep\ndetection.tau_e=0.6\nselection.tau_o=0.7\n").unwrap();
    let out = ok(d, &["pipeline", "--print-config", "--config", "run.cfg", "--tau-o", "0.75", "--seed", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("detection.tau_e=0.6\n"));
    assert!(text.contains("selection.tau_o=0.75\n"));
    assert!(text.contains("proposals.seed=5\n"));
    assert!(text.contains("detection.tau_c=0.9\n"));
    // The printed form is itself a valid config file.
    fs::write(d.join("echo.cfg"), &text).unwrap();
    let again = ok(d, &["pipeline", "--print-config", "--config", "echo.cfg"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn ablate_emits_one_row_per_scene_and_value() {
    let dir = scenes();
    let d = dir.path();
    ok(
        d,
        &["ablate", "--knob", "radius_scale", "--values", "1.0,1.5,3.0", "--suite", "s", "--scorer", "oracle", "--out", "a.csv"],
    );
    let csv = fs::read_to_string(d.join("a.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for scene in ["box", "cyl"] {
        for v in ["1.0", "1.5", "3.0"] {
            let prefix = format!("{scene},proposals.radius_scale,{v},");
            assert!(rows.iter().any(|r| r.starts_with(&prefix)), "{prefix}");
        }
    }
    let out = edgecurve(d, &["ablate", "--knob", "min_members", "--values", "8", "--suite", "s"]);
    assert_eq!(code(&out), 2, "`min_members` names two keys");
}

#[test]
fn eval_and_sidecar_scorer() {
    let dir = scenes();
    let d = dir.path();
    ok(
        d,
        &["detect", "--in", "s/cyl.ply", "--gt", "s/cyl.gt.json", "--scorer", "oracle", "--out", "det.json", "--scores-out", "cyl.ecsc"],
    );
    let det: serde_json::Value = serde_json::from_slice(&fs::read(d.join("det.json")).unwrap()).unwrap();
    assert!(!det["edges"].as_array().unwrap().is_empty());
    ok(
        d,
        &["pipeline", "--in", "s/cyl.ply", "--gt", "s/cyl.gt.json", "--scorer", "sidecar", "--sidecar", "cyl.ecsc", "--out", "c.json"],
    );
    let out = ok(d, &["eval", "--pred", "c.json", "--in", "s/cyl.ply", "--gt", "s/cyl.gt.json"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["gt_curves"], 2);
    assert_eq!(report["recovered_curves"], 2);
}

#[test]
fn pipeline_suite_writes_per_scene_outputs() {
    let dir = scenes();
    let d = dir.path();
    ok(d, &["pipeline", "--suite", "s", "--out-dir", "o", "--scorer", "oracle"]);
    for f in ["box.curves.json", "cyl.curves.json", "report.csv", "summary.json"] {
        assert!(d.join("o").join(f).is_file(), "{f}");
    }
    assert_eq!(fs::read_to_string(d.join("o/report.csv")).unwrap().lines().count(), 3);
}
