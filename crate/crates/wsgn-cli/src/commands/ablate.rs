use std::path::Path;

use wsgn_core::datagen::read_manifest;
use wsgn_core::evaluator::{detection_map, localization_map, read_detections, write_detections};
use wsgn_core::model::{Mode, Normalization, NormalizationSet};
use wsgn_core::trainer::{infer, train, TrainConfig};
use wsgn_core::{Error, Result};

use crate::commands::{create_dir, ground_truths, report_warnings, score_videos, write_text};
use crate::config::RunConfig;

fn variants() -> [(&'static str, Mode, NormalizationSet); 8] {
    [
        ("naive", Mode::Naive, NormalizationSet::all()),
        ("sloc", Mode::Wsgn, NormalizationSet::single(Normalization::Sloc)),
        ("zloc", Mode::Wsgn, NormalizationSet::single(Normalization::Zloc)),
        ("gloc", Mode::Wsgn, NormalizationSet::single(Normalization::Gloc)),
        (
            "sloc+gloc",
            Mode::Wsgn,
            NormalizationSet::single(Normalization::Sloc).with(Normalization::Gloc),
        ),
        (
            "zloc+gloc",
            Mode::Wsgn,
            NormalizationSet::single(Normalization::Zloc).with(Normalization::Gloc),
        ),
        ("complete", Mode::Wsgn, NormalizationSet::all()),
        ("supervised", Mode::Supervised, NormalizationSet::all()),
    ]
}

pub fn run(config: &RunConfig, data_dir: &Path, out: &Path) -> Result<()> {
    let (train_split, train_warnings) = read_manifest(data_dir.join("train").join("manifest.txt"))?;
    let (test_split, test_warnings) = read_manifest(data_dir.join("test").join("manifest.txt"))?;
    report_warnings(&train_warnings);
    report_warnings(&test_warnings);
    let feature_dim = train_split
        .videos
        .first()
        .map(|v| v.features.cols())
        .ok_or_else(|| Error::EmptyDataset("ablation needs a non-empty training split".into()))?;
    let gts = ground_truths(&test_split);

    create_dir(out)?;
    let detection_dir = out.join("detections");
    create_dir(&detection_dir)?;

    let mut table = String::from("variant,detection_map,localization_map\n");
    let mut summary: Vec<(&str, f64, f64)> = Vec::with_capacity(8);
    for (name, mode, normalizations) in variants() {
        let mut model_config = config.model_config(feature_dim, train_split.num_classes);
        model_config.enabled_normalizations = normalizations;
        let train_config = TrainConfig {
            mode,
            ..config.train.clone()
        };
        let result = train(&train_split, &model_config, &train_config)?;
        let traces = infer(&test_split, &result.params, &model_config, mode)?;
        let detector = config.detector_config(test_split.fps);
        detector.validate()?;
        let scored = score_videos(&traces, test_split.fps, &detector, config.timepoints)?;

        let detection_path = detection_dir.join(format!("{name}.csv"));
        write_detections(&detection_path, &scored.detections)?;
        let quantized = read_detections(&detection_path)?;
        let detection_report = detection_map(
            &quantized,
            &gts,
            test_split.num_classes,
            &config.iou_thresholds,
        )?;
        let detection = detection_report.map_at(0.5).unwrap_or(0.0);
        let localization = localization_map(&scored.timepoints, &gts, test_split.num_classes)?.map;

        table.push_str(&format!("{name},{detection:.6},{localization:.6}\n"));
        summary.push((name, detection, localization));
        eprintln!("{name}: detection {detection:.4}, localization {localization:.4}");
    }

    let find = |needle: &str| {
        summary
            .iter()
            .find(|(name, _, _)| *name == needle)
            .copied()
            .expect("all ablation variants ran")
    };
    let (_, naive_det, naive_loc) = find("naive");
    let (_, complete_det, complete_loc) = find("complete");
    let (_, supervised_det, supervised_loc) = find("supervised");
    table.push_str(&format!(
        "gap,{:.6},{:.6}\n",
        supervised_det - complete_det,
        supervised_loc - complete_loc
    ));
    table.push_str(&format!(
        "improvement,{:.6},{:.6}\n",
        complete_det - naive_det,
        complete_loc - naive_loc
    ));

    write_text(&out.join("ablation.csv"), &table)?;
    print!("{table}");
    Ok(())
}
