use std::path::Path;
use std::process::{Command, Output};

use projinv::descriptor::{GaussianBlobs, GrayImage};
use serde_json::Value;

const SAMPLE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample.json");

fn projinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_projinv")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn rank_three_points() {
    let out = projinv(&["rank", "--n", "3"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["rank"], 4);
}

#[test]
fn verify_all_passes() {
    let out = projinv(&["verify", "--suite", "all", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["passes"], true);
    assert_eq!(v["suites"].as_array().unwrap().len(), 8);
}

#[test]
fn exit_codes() {
    assert_eq!(projinv(&["frame", "/nonexistent/config.json"]).status.code(), Some(3));
    assert_eq!(projinv(&["rank"]).status.code(), Some(2));
    assert_eq!(projinv(&["verify", "--suite", "nope"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(projinv(&["invariants", bad.to_str().unwrap()]).status.code(), Some(3));

    // three collinear points
    let collinear = dir.path().join("collinear.json");
    std::fs::write(&collinear, r#"{"points": [
        {"x": 0, "y": 0, "p": 1, "q": 0},
        {"x": 1, "y": 1, "p": 0, "q": 1},
        {"x": 2, "y": 2, "p": 1, "q": 1}]}"#).unwrap();
    let out = projinv(&["frame", collinear.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn invariants_of_the_sample() {
    let out = projinv(&["invariants", SAMPLE, "--relations", "--json-indent", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(out.stdout.iter().filter(|&&b| b == b'\n').count(), 1);
    let v = json(&out);
    // 4n - 8 values for n = 5
    assert_eq!(v["values"].as_array().unwrap().len(), 12);
    assert_eq!(v["relations"]["passes"], true);
}

#[test]
fn negative_weights_parse() {
    let out = projinv(&["relative", "--check", "-1", "--n", "4", "--trials", "50"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["check"]["passes"], true);
    let out = projinv(&["relative", "--check", "1/3", "--function", "z", "--n", "6", "--trials", "50"]);
    assert!(out.status.success());
}

fn write_image(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("pattern.pgm");
    GaussianBlobs::test_pattern(48, 40).rasterize(48, 40).unwrap().write_pgm(&path, 16).unwrap();
    path
}

#[test]
fn warp_writes_an_image() {
    let dir = tempfile::tempdir().unwrap();
    let img = write_image(dir.path());
    let h = dir.path().join("h.json");
    std::fs::write(&h, r#"{"matrix": [[1, 0, 2], [0, 1, 1], [0, 0, 1]]}"#).unwrap();
    let out_path = dir.path().join("out.pgm");
    let out = projinv(&[
        "warp",
        img.to_str().unwrap(),
        "--homography",
        h.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--bits",
        "8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let back = GrayImage::read_pgm(&out_path).unwrap();
    assert_eq!((back.width(), back.height()), (48, 40));
    assert_eq!(projinv(&["warp", img.to_str().unwrap(), "--homography", h.to_str().unwrap(), "--out", "x.pgm", "--bits", "12"]).status.code(), Some(2));
}

#[test]
fn descriptor_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let img = write_image(dir.path());
    let run = |seed: &str| projinv(&["descriptor", img.to_str().unwrap(), "--samples", "300", "--seed", seed]).stdout;
    assert_eq!(run("1"), run("1"));
    assert_ne!(run("1"), run("2"));
}
