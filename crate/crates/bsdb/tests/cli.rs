use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bsdb::io::{load_masks, save_masks, save_sequence, DEFAULT_MASK_PATTERN};
use bsdb::report::parse_means;
use bsdb_core::{BinaryMask, Datacube};

fn bsdb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsdb")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bsdb(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    bsdb(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn mean_iou(report: &str) -> f64 {
    let means = parse_means(report).unwrap();
    assert_eq!(means.len(), 1, "{report}");
    means[0].1.iou
}

#[test]
fn constant_video_gives_empty_masks() {
    let dir = tempfile::tempdir().unwrap();
    let (input, out, truth) = (dir.path().join("in"), dir.path().join("out"), dir.path().join("truth"));
    let cube = Datacube::new(48, 48, 1, vec![vec![100.0; 48 * 48]; 8]).unwrap();
    save_sequence(&cube, &input, "frame_%05d.png").unwrap();
    save_masks(&vec![BinaryMask::empty(48, 48); 8], &truth, DEFAULT_MASK_PATTERN).unwrap();
    let report = ok(&["sbsdb", "--input", s(&input), "--output", s(&out), "--truth", s(&truth)]);
    assert!(load_masks(&out, DEFAULT_MASK_PATTERN).unwrap().iter().all(|m| m.count() == 0));
    assert_eq!(mean_iou(&report), 1.0);
}

#[test]
fn masks_against_themselves_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    ok(&["gen-synthetic", "--kind", "moving-square", "--seed", "3", "--output", s(&seq), "--frames", "6"]);
    let report = ok(&["eval", "--masks", s(&seq), "--truth", s(&seq)]);
    let means = parse_means(&report).unwrap();
    assert_eq!(means[0].1.iou, 1.0);
    assert_eq!(means[0].1.precision, 1.0);
    assert_eq!(means[0].1.recall, 1.0);
    assert_eq!(report.lines().count(), 7);
}

#[test]
fn static_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (seq, out, bg) = (dir.path().join("seq"), dir.path().join("out"), dir.path().join("bg.png"));
    ok(&["gen-synthetic", "--kind", "moving-square", "--seed", "1", "--output", s(&seq), "--noise-sigma", "1"]);
    let report = ok(&[
        "sbsdb",
        "--input",
        s(&seq),
        "--output",
        s(&out),
        "--truth",
        s(&seq),
        "--grid-rows",
        "1",
        "--grid-cols",
        "1",
    ]);
    assert!(mean_iou(&report) >= 0.8, "{report}");
    assert_eq!(load_masks(&out, DEFAULT_MASK_PATTERN).unwrap().len(), 30);
    ok(&["extract-bg", "--input", s(&seq), "--output", s(&bg)]);
    let img = image::open(&bg).unwrap().to_luma8();
    assert_eq!(img.dimensions(), (64, 64));
}

#[test]
fn dynamic_pipeline_train_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let (bgd, rtd, out) = (dir.path().join("bgd"), dir.path().join("rtd"), dir.path().join("out"));
    let model = dir.path().join("model.bin");
    let report_path = dir.path().join("report.txt");
    let params = dir.path().join("params.toml");
    fs::write(
        &params,
        "channels = 3\nnoise_sigma = 1.0\nsquare_start = [36.0, 4.0]\nsquare_velocity = [0.0, 2.0]\nsquare_color = [255.0, 220.0, 0.0]\n",
    )
    .unwrap();
    let p = s(&params);
    ok(&["gen-synthetic", "--kind", "flicker-bg", "--seed", "3", "--params", p, "--frames", "40", "--output", s(&bgd)]);
    ok(&[
        "gen-synthetic",
        "--kind",
        "combined",
        "--seed",
        "4",
        "--params",
        p,
        "--frames",
        "30",
        "--start-frame",
        "40",
        "--output",
        s(&rtd),
    ]);
    let grid = ["--grid-rows", "1", "--grid-cols", "1"];
    ok(&[&["dbsdb-train", "--input", s(&bgd), "--model", s(&model)][..], &grid].concat());
    ok(&[
        &["dbsdb-run", "--input", s(&rtd), "--model", s(&model), "--output", s(&out)][..],
        &["--truth", s(&rtd), "--report", s(&report_path)],
        &grid,
    ]
    .concat());
    let report = fs::read_to_string(&report_path).unwrap();
    assert_eq!(report.lines().count(), 31);
    assert!(mean_iou(&report) >= 0.7, "{report}");
}

#[test]
fn baseline_command_writes_masks() {
    let dir = tempfile::tempdir().unwrap();
    let (seq, out) = (dir.path().join("seq"), dir.path().join("out"));
    ok(&["gen-synthetic", "--kind", "moving-square", "--output", s(&seq), "--frames", "10"]);
    for method in ["frame_diff", "mean_threshold", "temporal_median", "eigen_background"] {
        ok(&["baseline", "--method", method, "--input", s(&seq), "--output", s(&out)]);
        assert_eq!(load_masks(&out, DEFAULT_MASK_PATTERN).unwrap().len(), 10);
    }
}

#[test]
fn eval_prints_a_row_per_method_and_benchmark() {
    let table = ok(&["eval", "--seed", "0"]);
    for bench in ["static", "flicker"] {
        for method in ["bsdb", "frame_diff", "mean_threshold", "temporal_median", "eigen_background"] {
            assert!(table.lines().any(|l| l.starts_with(bench) && l.contains(method)), "{bench} {method}\n{table}");
        }
    }
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for k in 0..2 {
        let (seq, out) = (dir.path().join(format!("seq{k}")), dir.path().join(format!("out{k}")));
        ok(&["gen-synthetic", "--kind", "combined", "--seed", "11", "--output", s(&seq), "--noise-sigma", "2"]);
        ok(&["sbsdb", "--input", s(&seq), "--output", s(&out), "--workers", &(k + 1).to_string()]);
        let mut files: Vec<_> =
            fs::read_dir(&seq).unwrap().chain(fs::read_dir(&out).unwrap()).map(|e| e.unwrap().path()).collect();
        files.sort_by_key(|p| p.file_name().unwrap().to_owned());
        runs.push(files.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn failures_map_to_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (seq, out) = (dir.path().join("seq"), dir.path().join("out"));
    ok(&["gen-synthetic", "--kind", "static-bg", "--output", s(&seq), "--frames", "6", "--channels", "3"]);

    assert_eq!(code(&["sbsdb", "--input", s(&seq), "--output", s(&out), "--m", "1"]), 2);
    assert_eq!(code(&["sbsdb", "--input", s(&seq), "--output", s(&out), "--m", "9"]), 2);
    assert_eq!(code(&["sbsdb", "--bogus-flag"]), 2);

    assert_eq!(code(&["sbsdb", "--input", s(&dir.path().join("missing")), "--output", s(&out)]), 4);
    let bad_config = dir.path().join("bad.toml");
    fs::write(&bad_config, "m = \"five\"").unwrap();
    assert_eq!(code(&["sbsdb", "--input", s(&seq), "--output", s(&out), "--config", s(&bad_config)]), 2);

    let model = dir.path().join("model.bin");
    ok(&["dbsdb-train", "--input", s(&seq), "--model", s(&model), "--grid-rows", "1", "--grid-cols", "1"]);
    let other = dir.path().join("other");
    ok(&[
        "gen-synthetic",
        "--kind",
        "static-bg",
        "--output",
        s(&other),
        "--frames",
        "6",
        "--channels",
        "3",
        "--width",
        "40",
    ]);
    assert_eq!(code(&["dbsdb-run", "--input", s(&other), "--model", s(&model), "--output", s(&out)]), 3);
}
