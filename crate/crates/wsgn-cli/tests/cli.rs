use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

use wsgn_core::datagen::{read_features_f64, read_manifest, write_features_f64};
use wsgn_core::detector::sample_timepoints;
use wsgn_core::diffcore::Matrix;
use wsgn_core::evaluator::{write_detections, Detection};

fn wsgn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsgn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("the wsgn binary should spawn")
}

fn run_ok(args: &[&str], dir: &Path) -> Output {
    let output = wsgn(args, dir);
    assert!(
        output.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn write_config(dir: &Path, contents: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, contents).unwrap();
    path
}

const SMALL: &str = "num_classes=3 feature_dim=6\n\
                     train_videos=8 test_videos=4\n\
                     min_frames=30 max_frames=50\n\
                     epochs=2 batch_size=4 sub_batches=2\n";

fn generate_small(dir: &Path) -> PathBuf {
    let config = write_config(dir, SMALL);
    run_ok(
        &["gen", "--config", config.to_str().unwrap(), "--out", "data"],
        dir,
    );
    config
}

#[test]
fn gen_is_deterministic_and_prints_a_summary() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), SMALL);
    let config = config.to_str().unwrap();
    let first = run_ok(&["gen", "--config", config, "--out", "a"], dir.path());
    run_ok(&["gen", "--config", config, "--out", "b"], dir.path());

    let stdout = String::from_utf8(first.stdout).unwrap();
    assert!(
        stdout.starts_with("split,videos,classes,segments\ntrain,8,3,"),
        "summary should lead with the header and train row, got:\n{stdout}"
    );

    for file in [
        "train/manifest.txt",
        "test/manifest.txt",
        "train/features/train_0000.wsgnf",
        "test/features/test_0003.wsgnf",
    ] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} should be byte-identical across reruns");
    }
}

#[test]
fn invalid_generator_settings_name_the_offending_field() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "min_frames=50 max_frames=20\n");
    let output = wsgn(
        &["gen", "--config", config.to_str().unwrap(), "--out", "data"],
        dir.path(),
    );
    assert!(!output.status.success(), "an empty frame range must be rejected");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("max_frames"),
        "the error should name the field, got:\n{stderr}"
    );
}

#[test]
fn unknown_config_keys_are_rejected_with_their_line() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "epochs=2\nnot_a_setting=5\n");
    let output = wsgn(
        &["gen", "--config", config.to_str().unwrap(), "--out", "data"],
        dir.path(),
    );
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("not_a_setting") && stderr.contains("line 2"),
        "the error should name the key and line, got:\n{stderr}"
    );
}

#[test]
fn training_is_reproducible_and_flags_override_the_file() {
    let dir = TempDir::new().unwrap();
    let config = generate_small(dir.path());
    let config = config.to_str().unwrap();
    let manifest = "data/train/manifest.txt";
    for out in ["run1", "run2"] {
        run_ok(
            &["train", "--config", config, "--data", manifest, "--out", out],
            dir.path(),
        );
    }
    for file in ["checkpoint.wsgnd", "loss_curve.csv"] {
        let a = fs::read(dir.path().join("run1").join(file)).unwrap();
        let b = fs::read(dir.path().join("run2").join(file)).unwrap();
        assert_eq!(a, b, "{file} should be byte-identical across reruns");
    }

    let curve = fs::read_to_string(dir.path().join("run1/loss_curve.csv")).unwrap();
    assert_eq!(
        curve.lines().count(),
        3,
        "two epochs should produce a header plus two rows, got:\n{curve}"
    );
    assert!(curve.starts_with("epoch,loss\n0,"), "unexpected loss curve:\n{curve}");

    run_ok(
        &[
            "train", "--config", config, "--data", manifest, "--out", "short", "--epochs", "1",
        ],
        dir.path(),
    );
    let short = fs::read_to_string(dir.path().join("short/loss_curve.csv")).unwrap();
    assert_eq!(
        short.lines().count(),
        2,
        "the --epochs flag should override the file, got:\n{short}"
    );
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let dir = TempDir::new().unwrap();
    let config = generate_small(dir.path());
    let config = config.to_str().unwrap();
    let manifest = "data/train/manifest.txt";
    run_ok(
        &[
            "train", "--config", config, "--data", manifest, "--out", "full", "--epochs", "4",
        ],
        dir.path(),
    );
    run_ok(
        &["train", "--config", config, "--data", manifest, "--out", "half"],
        dir.path(),
    );
    run_ok(
        &[
            "train",
            "--config",
            config,
            "--data",
            manifest,
            "--out",
            "resumed",
            "--epochs",
            "4",
            "--resume",
            "half/checkpoint.wsgnd",
        ],
        dir.path(),
    );
    let full = fs::read(dir.path().join("full/checkpoint.wsgnd")).unwrap();
    let resumed = fs::read(dir.path().join("resumed/checkpoint.wsgnd")).unwrap();
    assert_eq!(full, resumed, "resuming must continue exactly where training stopped");
    let full_curve = fs::read(dir.path().join("full/loss_curve.csv")).unwrap();
    let resumed_curve = fs::read(dir.path().join("resumed/loss_curve.csv")).unwrap();
    assert_eq!(full_curve, resumed_curve);
}

#[test]
fn resume_rejects_a_mismatched_configuration() {
    let dir = TempDir::new().unwrap();
    let config = generate_small(dir.path());
    let config = config.to_str().unwrap();
    let manifest = "data/train/manifest.txt";
    run_ok(
        &["train", "--config", config, "--data", manifest, "--out", "base"],
        dir.path(),
    );
    let output = wsgn(
        &[
            "train",
            "--config",
            config,
            "--data",
            manifest,
            "--out",
            "bad",
            "--epochs",
            "4",
            "--learning-rate",
            "0.05",
            "--resume",
            "base/checkpoint.wsgnd",
        ],
        dir.path(),
    );
    assert!(!output.status.success(), "resume must reject a changed learning rate");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("checkpoint mismatch"),
        "unexpected diagnostic:\n{stderr}"
    );
}

#[test]
fn detect_with_unreachable_threshold_writes_an_empty_file() {
    let dir = TempDir::new().unwrap();
    let config = generate_small(dir.path());
    let config = config.to_str().unwrap();
    run_ok(
        &[
            "train", "--config", config, "--data", "data/train/manifest.txt", "--out", "run",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "detect",
            "--config",
            config,
            "--data",
            "data/test/manifest.txt",
            "--checkpoint",
            "run/checkpoint.wsgnd",
            "--out",
            "det",
            "--threshold",
            "1.1",
        ],
        dir.path(),
    );
    let detections = fs::read_to_string(dir.path().join("det/detections.csv")).unwrap();
    assert_eq!(
        detections, "video_id,class_id,start,end,confidence\n",
        "no score can exceed 1.1, so only the header should remain"
    );
}

#[test]
fn dumped_components_recombine_into_the_dumped_scores() {
    let dir = TempDir::new().unwrap();
    let config = generate_small(dir.path());
    let config = config.to_str().unwrap();
    run_ok(
        &[
            "train", "--config", config, "--data", "data/train/manifest.txt", "--out", "run",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "detect",
            "--config",
            config,
            "--data",
            "data/test/manifest.txt",
            "--checkpoint",
            "run/checkpoint.wsgnd",
            "--out",
            "det",
            "--dump-components",
        ],
        dir.path(),
    );

    let (dataset, _) = read_manifest(dir.path().join("data/test/manifest.txt")).unwrap();
    for video in &dataset.videos {
        let base = dir.path().join("det/components").join(&video.id);
        let features = read_features_f64(base.join("features.wsgnf2")).unwrap();
        assert_eq!(features.rows(), video.num_frames());
        assert_eq!(features.cols(), 6, "features should keep the configured width");

        let probs = read_features_f64(base.join("probs.wsgnf2")).unwrap();
        let fused = read_features_f64(base.join("fused.wsgnf2")).unwrap();
        let scores = read_features_f64(base.join("scores.wsgnf2")).unwrap();
        for name in ["zloc", "gloc", "sloc"] {
            assert!(
                base.join(format!("{name}.wsgnf2")).exists(),
                "the complete model should dump its {name} weights"
            );
        }
        assert_eq!(probs.rows(), video.num_frames());
        assert_eq!(probs.cols(), 3);
        let mut worst = 0.0_f64;
        for t in 0..scores.rows() {
            for c in 0..scores.cols() {
                worst = worst.max((scores[(t, c)] - fused[(t, c)] * probs[(t, c)]).abs());
            }
        }
        assert!(
            worst <= 1e-12,
            "dumped scores should recombine from weights and probabilities, off by {worst:e}"
        );
    }
}

#[test]
fn perfect_detections_evaluate_to_full_marks() {
    let dir = TempDir::new().unwrap();
    let config = generate_small(dir.path());
    let (dataset, _) = read_manifest(dir.path().join("data/test/manifest.txt")).unwrap();
    let mut detections = Vec::new();
    for video in &dataset.videos {
        for seg in &video.gt_segments {
            detections.push(Detection {
                video_id: video.id.clone(),
                class_id: seg.class_id,
                start: seg.start as f64 / dataset.fps,
                end: seg.end as f64 / dataset.fps,
                confidence: 0.9,
            });
        }
    }
    write_detections(dir.path().join("perfect.csv"), &detections).unwrap();

    let output = run_ok(
        &[
            "eval",
            "--config",
            config.to_str().unwrap(),
            "--data",
            "data/test/manifest.txt",
            "--detections",
            "perfect.csv",
            "--out",
            "ev",
        ],
        dir.path(),
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    let map_row = stdout
        .lines()
        .find(|line| line.starts_with("mAP,"))
        .expect("the report should contain a mAP row");
    for cell in map_row.split(',').skip(1) {
        assert_eq!(cell, "1.000000", "perfect detections should score 1 everywhere");
    }
    assert_eq!(
        stdout,
        fs::read_to_string(dir.path().join("ev/detection_report.csv")).unwrap(),
        "the printed report should match the written file"
    );
}

#[test]
fn localization_on_indicator_scores_is_perfect() {
    let dir = TempDir::new().unwrap();
    let config = generate_small(dir.path());
    let (dataset, _) = read_manifest(dir.path().join("data/test/manifest.txt")).unwrap();
    let scores_dir = dir.path().join("indicator");
    fs::create_dir_all(&scores_dir).unwrap();
    for video in &dataset.videos {
        let indices = sample_timepoints(video.num_frames(), 25);
        let mut dump = Matrix::zeros(indices.len(), 1 + dataset.num_classes);
        for (k, &t) in indices.iter().enumerate() {
            dump[(k, 0)] = t as f64 / dataset.fps;
            for seg in &video.gt_segments {
                if t >= seg.start && t < seg.end {
                    dump[(k, 1 + seg.class_id)] = 1.0;
                }
            }
        }
        write_features_f64(scores_dir.join(format!("{}.wsgnf2", video.id)), &dump).unwrap();
    }

    let output = run_ok(
        &[
            "eval",
            "--config",
            config.to_str().unwrap(),
            "--data",
            "data/test/manifest.txt",
            "--localization",
            "--scores-dir",
            "indicator",
            "--out",
            "evloc",
        ],
        dir.path(),
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    let map_row = stdout
        .lines()
        .find(|line| line.starts_with("mAP,"))
        .expect("the report should contain a mAP row");
    assert_eq!(map_row, "mAP,1.000000", "indicator scores rank every positive first");
}

#[test]
fn eval_without_detections_explains_what_is_missing() {
    let dir = TempDir::new().unwrap();
    generate_small(dir.path());
    let output = wsgn(
        &["eval", "--data", "data/test/manifest.txt", "--out", "ev"],
        dir.path(),
    );
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--detections"), "unexpected diagnostic:\n{stderr}");
}

#[test]
fn ablation_table_rows_match_isolated_runs() {
    let dir = TempDir::new().unwrap();
    let config = generate_small(dir.path());
    let config = config.to_str().unwrap();
    let output = run_ok(
        &["ablate", "--config", config, "--data", "data", "--out", "abl"],
        dir.path(),
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "variant,detection_map,localization_map");
    let expected = [
        "naive",
        "sloc",
        "zloc",
        "gloc",
        "sloc+gloc",
        "zloc+gloc",
        "complete",
        "supervised",
        "gap",
        "improvement",
    ];
    assert_eq!(lines.len(), expected.len() + 1, "unexpected table:\n{stdout}");
    for (line, name) in lines[1..].iter().zip(expected) {
        assert!(
            line.starts_with(&format!("{name},")),
            "row should start with {name}: {line}"
        );
        for cell in line.split(',').skip(1) {
            let value: f64 = cell.parse().expect("table cells should be numbers");
            assert!(value.is_finite());
        }
    }

    run_ok(
        &[
            "train",
            "--config",
            config,
            "--data",
            "data/train/manifest.txt",
            "--out",
            "runz",
            "--mode",
            "wsgn",
            "--normalizations",
            "zloc",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "detect",
            "--config",
            config,
            "--data",
            "data/test/manifest.txt",
            "--checkpoint",
            "runz/checkpoint.wsgnd",
            "--out",
            "detz",
        ],
        dir.path(),
    );
    assert_eq!(
        fs::read(dir.path().join("abl/detections/zloc.csv")).unwrap(),
        fs::read(dir.path().join("detz/detections.csv")).unwrap(),
        "the ablation's detections should match an isolated train+detect run"
    );

    let eval_out = run_ok(
        &[
            "eval",
            "--config",
            config,
            "--data",
            "data/test/manifest.txt",
            "--detections",
            "detz/detections.csv",
            "--out",
            "evz",
        ],
        dir.path(),
    );
    let eval_text = String::from_utf8(eval_out.stdout).unwrap();
    let header: Vec<&str> = eval_text.lines().next().unwrap().split(',').collect();
    let column = header
        .iter()
        .position(|cell| *cell == "ap@0.50")
        .expect("the default threshold grid includes 0.5");
    let eval_map = eval_text
        .lines()
        .find(|line| line.starts_with("mAP,"))
        .unwrap()
        .split(',')
        .nth(column)
        .unwrap()
        .to_string();

    let zloc_row = stdout
        .lines()
        .find(|line| line.starts_with("zloc,"))
        .unwrap();
    let ablation_map = zloc_row.split(',').nth(1).unwrap();
    assert_eq!(
        ablation_map, eval_map,
        "the ablation's detection column should reproduce via train+detect+eval"
    );

    let loc_out = run_ok(
        &[
            "eval",
            "--config",
            config,
            "--data",
            "data/test/manifest.txt",
            "--localization",
            "--scores-dir",
            "detz/timepoints",
            "--out",
            "evzloc",
        ],
        dir.path(),
    );
    let loc_text = String::from_utf8(loc_out.stdout).unwrap();
    let loc_map = loc_text
        .lines()
        .find(|line| line.starts_with("mAP,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap();
    assert_eq!(
        zloc_row.split(',').nth(2).unwrap(),
        loc_map,
        "the ablation's localization column should reproduce via detect+eval"
    );
}

#[test]
fn gradcheck_passes_and_the_negative_control_fails() {
    let dir = TempDir::new().unwrap();
    let output = run_ok(&["gradcheck"], dir.path());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.starts_with("block,max_relative_error\n"));
    assert_eq!(
        stdout.lines().count(),
        12,
        "expected ten block rows plus header and overall, got:\n{stdout}"
    );
    let overall: f64 = stdout
        .lines()
        .last()
        .unwrap()
        .strip_prefix("overall,")
        .unwrap()
        .parse()
        .unwrap();
    assert!(overall < 1e-4, "gradients should verify, got {overall:e}");

    let broken = wsgn(&["gradcheck", "--break-gradients"], dir.path());
    assert!(
        !broken.status.success(),
        "doubling a gradient block must make the check fail"
    );
    let broken_stdout = String::from_utf8(broken.stdout).unwrap();
    let det_w1 = broken_stdout
        .lines()
        .find(|line| line.starts_with("det_w1,"))
        .unwrap();
    let error: f64 = det_w1.strip_prefix("det_w1,").unwrap().parse().unwrap();
    assert!(
        error > 0.1,
        "a doubled gradient should look catastrophically wrong, got {error:e}"
    );
}
