use std::fs;
use std::path::{Path, PathBuf};

use wsgn_core::datagen::{read_features_f64, read_manifest};
use wsgn_core::diffcore::Matrix;
use wsgn_core::evaluator::{detection_map, localization_map, read_detections, TimepointScores};
use wsgn_core::{Error, Result};

use crate::commands::{create_dir, ground_truths, report_warnings, write_text};
use crate::config::RunConfig;

pub fn run_detection(
    config: &RunConfig,
    data: &Path,
    detections_path: &Path,
    out: &Path,
) -> Result<()> {
    let (dataset, warnings) = read_manifest(data)?;
    report_warnings(&warnings);
    let gts = ground_truths(&dataset);
    let detections = read_detections(detections_path)?;
    let report = detection_map(
        &detections,
        &gts,
        dataset.num_classes,
        &config.iou_thresholds,
    )?;
    create_dir(out)?;
    let csv = report.to_csv();
    write_text(&out.join("detection_report.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn run_localization(data: &Path, scores_dir: &Path, out: &Path) -> Result<()> {
    let (dataset, warnings) = read_manifest(data)?;
    report_warnings(&warnings);
    let gts = ground_truths(&dataset);

    let mut paths: Vec<PathBuf> = fs::read_dir(scores_dir)
        .map_err(|err| Error::io(scores_dir.display().to_string(), err))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "wsgnf2"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no timepoint score files (*.wsgnf2) in {}",
            scores_dir.display()
        )));
    }

    let mut videos = Vec::with_capacity(paths.len());
    for path in paths {
        let dump = read_features_f64(&path)?;
        if dump.cols() < 2 {
            return Err(Error::Format {
                path: path.display().to_string(),
                offset: 0,
                detail: "timepoint dumps need a timestamp column plus class score columns"
                    .to_string(),
            });
        }
        let video_id = path
            .file_stem()
            .map(|stem| stem.to_string_lossy().into_owned())
            .unwrap_or_default();
        let rows = dump.rows();
        let cols = dump.cols() - 1;
        let mut scores = Matrix::zeros(rows, cols);
        let mut timestamps = Vec::with_capacity(rows);
        for k in 0..rows {
            timestamps.push(dump[(k, 0)]);
            for c in 0..cols {
                scores[(k, c)] = dump[(k, c + 1)];
            }
        }
        videos.push(TimepointScores {
            video_id,
            scores,
            timestamps,
        });
    }

    let report = localization_map(&videos, &gts, dataset.num_classes)?;
    create_dir(out)?;
    let csv = report.to_csv();
    write_text(&out.join("localization_report.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}
