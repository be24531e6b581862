use std::path::Path;

use wsgn_core::datagen::{read_manifest, write_features_f64};
use wsgn_core::diffcore::Matrix;
use wsgn_core::evaluator::write_detections;
use wsgn_core::trainer::{infer, load_checkpoint};
use wsgn_core::Result;

use crate::commands::{create_dir, report_warnings, score_videos};
use crate::config::RunConfig;

pub fn run(
    config: &RunConfig,
    data: &Path,
    checkpoint_path: &Path,
    dump_components: bool,
    out: &Path,
) -> Result<()> {
    let (dataset, warnings) = read_manifest(data)?;
    report_warnings(&warnings);
    let checkpoint = load_checkpoint(checkpoint_path)?;
    let detector = config.detector_config(dataset.fps);
    detector.validate()?;

    let traces = infer(
        &dataset,
        &checkpoint.params,
        &checkpoint.model_config,
        checkpoint.train_config.mode,
    )?;
    let scored = score_videos(&traces, dataset.fps, &detector, config.timepoints)?;

    create_dir(out)?;
    write_detections(out.join("detections.csv"), &scored.detections)?;

    let timepoint_dir = out.join("timepoints");
    create_dir(&timepoint_dir)?;
    for tp in &scored.timepoints {
        let rows = tp.scores.rows();
        let cols = tp.scores.cols();
        let mut dump = Matrix::zeros(rows, cols + 1);
        for k in 0..rows {
            dump[(k, 0)] = tp.timestamps[k];
            for c in 0..cols {
                dump[(k, c + 1)] = tp.scores[(k, c)];
            }
        }
        write_features_f64(timepoint_dir.join(format!("{}.wsgnf2", tp.video_id)), &dump)?;
    }

    if dump_components {
        let component_dir = out.join("components");
        for (video, video_trace) in dataset.videos.iter().zip(&traces) {
            let dir = component_dir.join(&video.id);
            create_dir(&dir)?;
            write_features_f64(dir.join("features.wsgnf2"), &video.features)?;
            write_features_f64(dir.join("probs.wsgnf2"), &video_trace.trace.probs)?;
            if let Some(z) = &video_trace.trace.zloc_weights {
                write_features_f64(dir.join("zloc.wsgnf2"), z)?;
            }
            if let Some(l) = &video_trace.trace.gloc_weights {
                write_features_f64(dir.join("gloc.wsgnf2"), l)?;
            }
            if let Some(s) = &video_trace.trace.sloc_weights {
                write_features_f64(dir.join("sloc.wsgnf2"), s)?;
            }
            write_features_f64(dir.join("fused.wsgnf2"), &video_trace.trace.fused)?;
            let scores =
                wsgn_core::model::frame_scores(&video_trace.trace.probs, &video_trace.trace.fused)?;
            write_features_f64(dir.join("scores.wsgnf2"), &scores)?;
        }
    }

    eprintln!(
        "wrote {} detections across {} videos",
        scored.detections.len(),
        dataset.videos.len()
    );
    Ok(())
}
