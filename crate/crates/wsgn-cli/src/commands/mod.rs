pub mod ablate;
pub mod detect;
pub mod eval;
pub mod gen;
pub mod gradcheck;
pub mod train;

use std::fs;
use std::path::Path;

use wsgn_core::datagen::Dataset;
use wsgn_core::detector::{extract_segments, sample_timepoints, score_timepoints, DetectorConfig};
use wsgn_core::evaluator::{Detection, GroundTruth, TimepointScores};
use wsgn_core::model::frame_scores;
use wsgn_core::trainer::VideoTrace;
use wsgn_core::{Error, Result};

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|err| Error::io(path.display().to_string(), err))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|err| Error::io(path.display().to_string(), err))
}

pub(crate) fn report_warnings(warnings: &[String]) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
}

/// Ground-truth segments converted from frame indices to seconds.
pub(crate) fn ground_truths(dataset: &Dataset) -> Vec<GroundTruth> {
    let mut gts = Vec::new();
    for video in &dataset.videos {
        for seg in &video.gt_segments {
            gts.push(GroundTruth {
                video_id: video.id.clone(),
                class_id: seg.class_id,
                start: seg.start as f64 / dataset.fps,
                end: seg.end as f64 / dataset.fps,
            });
        }
    }
    gts
}

pub(crate) struct ScoredVideos {
    pub detections: Vec<Detection>,
    pub timepoints: Vec<TimepointScores>,
}

/// Turns per-video inference traces into detections and sampled timepoint
/// scores.
pub(crate) fn score_videos(
    traces: &[VideoTrace],
    fps: f64,
    detector: &DetectorConfig,
    timepoint_count: usize,
) -> Result<ScoredVideos> {
    let mut detections = Vec::new();
    let mut timepoints = Vec::new();
    for video_trace in traces {
        let scores = frame_scores(&video_trace.trace.probs, &video_trace.trace.fused)?;
        for seg in extract_segments(&scores, detector)? {
            detections.push(Detection {
                video_id: video_trace.video_id.clone(),
                class_id: seg.class_id,
                start: seg.start,
                end: seg.end,
                confidence: seg.confidence,
            });
        }
        let indices = sample_timepoints(scores.rows(), timepoint_count);
        timepoints.push(TimepointScores {
            video_id: video_trace.video_id.clone(),
            scores: score_timepoints(&scores, timepoint_count),
            timestamps: indices.iter().map(|&t| t as f64 / fps).collect(),
        });
    }
    Ok(ScoredVideos {
        detections,
        timepoints,
    })
}

/// Loss curve as comma-separated (epoch, loss) rows.
pub(crate) fn render_loss_curve(losses: &[f64]) -> String {
    let mut text = String::from("epoch,loss\n");
    for (epoch, loss) in losses.iter().enumerate() {
        text.push_str(&format!("{epoch},{loss}\n"));
    }
    text
}
