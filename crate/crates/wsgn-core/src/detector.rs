//! Turns per-frame score matrices into timestamped detections and samples
//! fixed timepoint grids for localization scoring.

use crate::diffcore::Matrix;
use crate::error::{Error, Result};

/// A detected action occurrence in seconds, end exclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub class_id: usize,
    pub start: f64,
    pub end: f64,
    pub confidence: f64,
}

/// Thresholding and run-filtering knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Frames score strictly above this value join a candidate run.
    pub score_threshold: f64,
    /// Runs must last strictly longer than this many seconds.
    pub min_duration: f64,
    pub fps: f64,
}

impl DetectorConfig {
    pub fn new(fps: f64) -> Self {
        DetectorConfig {
            score_threshold: 0.1,
            min_duration: 1.0,
            fps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.score_threshold.is_finite() {
            return Err(Error::InvalidConfig {
                field: "score_threshold",
                detail: "must be finite".to_string(),
            });
        }
        if !(self.min_duration.is_finite() && self.min_duration >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "min_duration",
                detail: "must be non-negative and finite".to_string(),
            });
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidConfig {
                field: "fps",
                detail: "must be positive and finite".to_string(),
            });
        }
        Ok(())
    }
}

/// Extracts per-class maximal runs of frames scoring strictly above the
/// threshold. A run over frames [s, e) becomes the interval
/// [s/fps, e/fps) with confidence equal to the mean score over its frames;
/// runs not strictly longer than `min_duration` seconds are dropped. Output
/// is sorted by class, then start time.
pub fn extract_segments(scores: &Matrix, config: &DetectorConfig) -> Result<Vec<Segment>> {
    config.validate()?;
    let frames = scores.rows();
    let mut segments = Vec::new();
    for class_id in 0..scores.cols() {
        let mut run_start: Option<usize> = None;
        let mut run_sum = 0.0;
        for t in 0..=frames {
            let above = t < frames && scores[(t, class_id)] > config.score_threshold;
            if above {
                if run_start.is_none() {
                    run_start = Some(t);
                    run_sum = 0.0;
                }
                run_sum += scores[(t, class_id)];
            } else if let Some(s) = run_start.take() {
                let duration = (t - s) as f64 / config.fps;
                if duration > config.min_duration {
                    segments.push(Segment {
                        class_id,
                        start: s as f64 / config.fps,
                        end: t as f64 / config.fps,
                        confidence: run_sum / (t - s) as f64,
                    });
                }
            }
        }
    }
    Ok(segments)
}

/// Indices of `count` equally spaced frames in a `frames`-long video, using
/// nearest-frame rounding. Degenerates to all zeros for a single frame or a
/// single sample.
pub fn sample_timepoints(frames: usize, count: usize) -> Vec<usize> {
    assert!(frames >= 1, "need at least one frame, got {frames}");
    assert!(count >= 1, "need at least one sample, got {count}");
    if frames == 1 || count == 1 {
        return vec![0; count];
    }
    (0..count)
        .map(|k| (k as f64 * (frames - 1) as f64 / (count - 1) as f64).round() as usize)
        .collect()
}

/// Gathers score rows at the `sample_timepoints` indices into a
/// `count` x C matrix.
pub fn score_timepoints(scores: &Matrix, count: usize) -> Matrix {
    let indices = sample_timepoints(scores.rows(), count);
    let rows: Vec<Vec<f64>> = indices.iter().map(|&t| scores.row(t).to_vec()).collect();
    Matrix::from_rows(&rows).expect("gathered rows share the source width")
}
