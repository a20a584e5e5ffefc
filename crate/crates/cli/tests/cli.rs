// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "\
[terrain]
width = 24
height = 24
resolution = 0.25
n_rocks = 4
seed = 3

[scan]
range = 250
detector_cols = 80
detector_rows = 80

[dem]
cell_size = 0.25
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_terrain-hazard"));
    c.env_remove("TERRAIN_HAZARD_THREADS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing from {report}"))
        .parse()
        .unwrap()
}

#[test]
fn stage_by_stage_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.cfg"), CONFIG).unwrap();
    ok(d, &["synth", "--config", "c.cfg", "--out", "truth.grd", "--rocks", "rocks.csv"]);
    assert_eq!(std::fs::read_to_string(d.join("rocks.csv")).unwrap().lines().count(), 5);
    ok(d, &["scan", "--truth", "truth.grd", "--config", "c.cfg", "--out", "cloud.bin"]);
    ok(d, &["dem", "baseline", "--cloud", "cloud.bin", "--auto-gsd", "--out", "base.asc"]);
    ok(d, &["dem", "gaussian", "--cloud", "cloud.bin", "--cell-size", "0.25", "--mean", "m.grd", "--variance", "v.grd"]);
    ok(d, &["hd", "oracle", "--dem", "truth.grd", "--dtheta", "3", "--out", "truth_hd"]);
    ok(d, &["hd", "stochastic", "--gdem", "m.grd", "v.grd", "--slope-bound", "sin", "--out", "prop"]);
    ok(d, &["hd", "baseline", "--dem", "base.asc", "--sigma", "0.02", "--dtheta", "3", "--out", "base_hd"]);

    let rmse = value(&ok(d, &["eval", "--truth", "truth.grd", "--pred", "m.grd", "--metric", "rmse"]), "rmse");
    assert!(rmse > 0.0 && rmse < 0.1, "{rmse}");
    let nlpd = ok(d, &["eval", "--truth", "truth.grd", "--pred", "m.grd", "--metric", "nlpd", "--variance", "v.grd"]);
    assert!(value(&nlpd, "nlpd").is_finite());
    for pred in ["prop/p_rough.grd", "base_hd/p_rough.grd"] {
        let pr = ok(d, &["eval", "--truth", "truth_hd/rough_safe.grd", "--pred", pred, "--metric", "pr"]);
        let p = value(&pr, "precision");
        assert!((0.0..=1.0).contains(&p), "{pred}: {pr}");
    }
    let miss = ok(d, &["eval", "--truth", "truth_hd/safe.grd", "--pred", "prop/p_safe.grd", "--metric", "missing", "--out", "miss.grd"]);
    assert!(value(&miss, "cells") > 0.0);
    assert!(d.join("miss.grd").exists());
}

#[test]
fn lander_config_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.cfg"), CONFIG).unwrap();
    std::fs::write(d.join("lander.cfg"), "[lander]\nleg_circle_radius = 3\nroughness_threshold = 0.3\n").unwrap();
    ok(d, &["synth", "--config", "c.cfg", "--out", "truth.grd"]);
    ok(d, &["hd", "fast", "--dem", "truth.grd", "--lander", "lander.cfg", "--out", "a"]);
    ok(d, &["hd", "fast", "--dem", "truth.grd", "--out", "b"]);
    assert_ne!(std::fs::read(d.join("a/safe.grd")).unwrap(), std::fs::read(d.join("b/safe.grd")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.cfg"), "terrain.colour = red\n").unwrap();
    std::fs::write(d.join("c.cfg"), CONFIG).unwrap();
    assert_eq!(run(d, &["pipeline", "--config", "bad.cfg", "--out", "o"]).status.code(), Some(2));
    assert_eq!(run(d, &["pipeline", "--config", "absent.cfg", "--out", "o"]).status.code(), Some(2));
    assert_eq!(run(d, &["hd", "fast", "--dem", "x.grd", "--slope-bound", "cos", "--out", "o"]).status.code(), Some(2));
    assert_eq!(run(d, &["hd", "warp"]).status.code(), Some(2));
    let missing = run(d, &["hd", "fast", "--dem", "absent.grd", "--out", "o"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("absent.grd"));
    std::fs::write(d.join("crowded.cfg"), format!("{CONFIG}[terrain]\nn_rocks = 5000\nrock_diameter = 2\nattempts_per_rock = 1\n").replace("n_rocks = 4\n", "")).unwrap();
    let crowded = run(d, &["pipeline", "--config", "crowded.cfg", "--out", "o"]);
    assert_eq!(crowded.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&crowded.stderr).contains("synth stage failed"));
}

#[test]
fn pipeline_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.cfg"), format!("{CONFIG}[hd]\ndetectors = fast, stochastic, baseline\ndtheta = 4\n")).unwrap();
    ok(d, &["--threads", "1", "pipeline", "--config", "c.cfg", "--out", "one"]);
    let out = bin()
        .current_dir(d)
        .env("TERRAIN_HAZARD_THREADS", "3")
        .args(["pipeline", "--config", "c.cfg", "--out", "three"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = std::fs::read_to_string(d.join("one/manifest.json")).unwrap();
    let b = std::fs::read_to_string(d.join("three/manifest.json")).unwrap();
    assert_eq!(a, b);
    assert!(a.contains("\"config_sha256\""));
    assert!(a.contains("scan_r250_a0/stochastic_safe.grd"));
}
