//! Detection and localization metrics: interval IoU, greedy matching,
//! average precision with envelope interpolation, and report tables.

pub mod oracle;

use std::fs;
use std::path::Path;

use crate::diffcore::Matrix;
use crate::error::{Error, Result};

pub use oracle::brute_force_ap;

/// One scored detection tied to its source video.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub video_id: String,
    pub class_id: usize,
    pub start: f64,
    pub end: f64,
    pub confidence: f64,
}

/// One ground-truth occurrence tied to its source video, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub video_id: String,
    pub class_id: usize,
    pub start: f64,
    pub end: f64,
}

/// Intersection over union of two half-open time intervals; zero when they
/// are disjoint or merely touch.
pub fn interval_iou(a_start: f64, a_end: f64, b_start: f64, b_end: f64) -> f64 {
    let intersection = (a_end.min(b_end) - a_start.max(b_start)).max(0.0);
    if intersection <= 0.0 {
        return 0.0;
    }
    let union = (a_end - a_start) + (b_end - b_start) - intersection;
    intersection / union
}

/// Ranks detections by confidence (ties by earlier start, then video id, then
/// input order), greedily matches each against the best unmatched same-video
/// ground truth, and returns the true-positive flag per rank.
fn match_detections(dets: &[&Detection], gts: &[&GroundTruth], iou_threshold: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                dets[a]
                    .start
                    .partial_cmp(&dets[b].start)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .then_with(|| dets[a].video_id.cmp(&dets[b].video_id))
    });

    let mut matched = vec![false; gts.len()];
    let mut flags = Vec::with_capacity(dets.len());
    for &d in &order {
        let det = dets[d];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if matched[g] || gt.video_id != det.video_id {
                continue;
            }
            let iou = interval_iou(det.start, det.end, gt.start, gt.end);
            if best.map_or(true, |(_, best_iou)| iou > best_iou) {
                best = Some((g, iou));
            }
        }
        match best {
            Some((g, iou)) if iou >= iou_threshold => {
                matched[g] = true;
                flags.push(true);
            }
            _ => flags.push(false),
        }
    }
    flags
}

/// Integrates a ranked true-positive sequence into average precision using
/// all-point interpolation: precision at each recall level is the maximum
/// precision achieved at that recall or beyond.
fn envelope_ap(flags: &[bool], num_positives: usize) -> f64 {
    if num_positives == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(flags.len());
    let mut recall = Vec::with_capacity(flags.len());
    let mut tp = 0usize;
    for (rank, &is_tp) in flags.iter().enumerate() {
        if is_tp {
            tp += 1;
        }
        precision.push(tp as f64 / (rank + 1) as f64);
        recall.push(tp as f64 / num_positives as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        if precision[k + 1] > precision[k] {
            precision[k] = precision[k + 1];
        }
    }
    let mut ap = 0.0;
    let mut previous_recall = 0.0;
    for k in 0..flags.len() {
        ap += (recall[k] - previous_recall) * precision[k];
        previous_recall = recall[k];
    }
    ap
}

/// Average precision for one class of detections against one class of ground
/// truths. Matching is within-video; the IoU comparison is inclusive.
pub fn average_precision(dets: &[Detection], gts: &[GroundTruth], iou_threshold: f64) -> f64 {
    let det_refs: Vec<&Detection> = dets.iter().collect();
    let gt_refs: Vec<&GroundTruth> = gts.iter().collect();
    let flags = match_detections(&det_refs, &gt_refs, iou_threshold);
    envelope_ap(&flags, gts.len())
}

/// Per-class AP table over an IoU threshold grid plus the per-threshold mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    /// Indexed `[class][threshold]`.
    pub ap: Vec<Vec<f64>>,
    /// Mean over classes with at least one ground truth, per threshold.
    pub map: Vec<f64>,
    pub detection_counts: Vec<usize>,
    pub ground_truth_counts: Vec<usize>,
}

impl EvalReport {
    /// mAP at the threshold numerically closest to the requested value.
    pub fn map_at(&self, threshold: f64) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for (&t, &m) in self.thresholds.iter().zip(&self.map) {
            let distance = (t - threshold).abs();
            if best.map_or(true, |(d, _)| distance < d) {
                best = Some((distance, m));
            }
        }
        best.map(|(_, m)| m)
    }

    /// Comma-separated table: one row per class, a final mAP row, one column
    /// per IoU threshold.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class");
        for t in &self.thresholds {
            out.push_str(&format!(",ap@{t:.2}"));
        }
        out.push('\n');
        for (class_id, row) in self.ap.iter().enumerate() {
            out.push_str(&class_id.to_string());
            for ap in row {
                out.push_str(&format!(",{ap:.6}"));
            }
            out.push('\n');
        }
        out.push_str("mAP");
        for m in &self.map {
            out.push_str(&format!(",{m:.6}"));
        }
        out.push('\n');
        out
    }
}

/// Pools detections per class across videos and scores them against the
/// ground truth at every threshold in the grid. Classes without any ground
/// truth are reported but excluded from the mean.
pub fn detection_map(
    dets: &[Detection],
    gts: &[GroundTruth],
    num_classes: usize,
    thresholds: &[f64],
) -> Result<EvalReport> {
    if thresholds.is_empty() {
        return Err(Error::InvalidConfig {
            field: "thresholds",
            detail: "need at least one IoU threshold".to_string(),
        });
    }
    for det in dets {
        if det.class_id >= num_classes {
            return Err(Error::InvalidConfig {
                field: "detections",
                detail: format!("class {} out of range for {num_classes} classes", det.class_id),
            });
        }
    }
    for gt in gts {
        if gt.class_id >= num_classes {
            return Err(Error::InvalidConfig {
                field: "ground_truths",
                detail: format!("class {} out of range for {num_classes} classes", gt.class_id),
            });
        }
    }

    let mut ap = vec![vec![0.0; thresholds.len()]; num_classes];
    let mut detection_counts = vec![0usize; num_classes];
    let mut ground_truth_counts = vec![0usize; num_classes];
    for det in dets {
        detection_counts[det.class_id] += 1;
    }
    for gt in gts {
        ground_truth_counts[gt.class_id] += 1;
    }

    for class_id in 0..num_classes {
        let class_dets: Vec<&Detection> = dets.iter().filter(|d| d.class_id == class_id).collect();
        let class_gts: Vec<&GroundTruth> = gts.iter().filter(|g| g.class_id == class_id).collect();
        for (k, &threshold) in thresholds.iter().enumerate() {
            let flags = match_detections(&class_dets, &class_gts, threshold);
            ap[class_id][k] = envelope_ap(&flags, class_gts.len());
        }
    }

    let scored: Vec<usize> = (0..num_classes).filter(|&q| ground_truth_counts[q] > 0).collect();
    let map = (0..thresholds.len())
        .map(|k| {
            if scored.is_empty() {
                0.0
            } else {
                scored.iter().map(|&q| ap[q][k]).sum::<f64>() / scored.len() as f64
            }
        })
        .collect();

    Ok(EvalReport {
        thresholds: thresholds.to_vec(),
        ap,
        map,
        detection_counts,
        ground_truth_counts,
    })
}

/// Scores sampled at a video's timepoint grid, with the timestamp of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct TimepointScores {
    pub video_id: String,
    /// K x C score matrix.
    pub scores: Matrix,
    /// Length K, seconds.
    pub timestamps: Vec<f64>,
}

/// Per-class AP over pooled (video, timepoint) pairs and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct LocReport {
    pub ap: Vec<f64>,
    /// Mean over classes with at least one positive timepoint.
    pub map: f64,
    pub positive_counts: Vec<usize>,
    pub total_timepoints: usize,
}

impl LocReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,ap\n");
        for (class_id, ap) in self.ap.iter().enumerate() {
            out.push_str(&format!("{class_id},{ap:.6}\n"));
        }
        out.push_str(&format!("mAP,{:.6}\n", self.map));
        out
    }
}

/// Ranks pooled timepoints per class by score and computes AP against the
/// indicator of lying inside a same-class ground-truth segment. Exact score
/// ties are integrated as one group, so a constant scorer earns exactly the
/// positive prevalence.
pub fn localization_map(
    videos: &[TimepointScores],
    gts: &[GroundTruth],
    num_classes: usize,
) -> Result<LocReport> {
    let mut pooled: Vec<Vec<(f64, bool)>> = vec![Vec::new(); num_classes];
    let mut total_timepoints = 0usize;
    for video in videos {
        if video.scores.cols() != num_classes {
            return Err(Error::DimensionMismatch {
                op: "localization_map",
                detail: format!(
                    "video {} has {} score columns, expected {num_classes}",
                    video.video_id,
                    video.scores.cols()
                ),
            });
        }
        if video.timestamps.len() != video.scores.rows() {
            return Err(Error::DimensionMismatch {
                op: "localization_map",
                detail: format!(
                    "video {} has {} timestamps for {} score rows",
                    video.video_id,
                    video.timestamps.len(),
                    video.scores.rows()
                ),
            });
        }
        total_timepoints += video.timestamps.len();
        for (k, &time) in video.timestamps.iter().enumerate() {
            for class_id in 0..num_classes {
                let positive = gts.iter().any(|g| {
                    g.video_id == video.video_id
                        && g.class_id == class_id
                        && g.start <= time
                        && time < g.end
                });
                pooled[class_id].push((video.scores[(k, class_id)], positive));
            }
        }
    }

    let mut ap = vec![0.0; num_classes];
    let mut positive_counts = vec![0usize; num_classes];
    for class_id in 0..num_classes {
        let items = &mut pooled[class_id];
        positive_counts[class_id] = items.iter().filter(|(_, p)| *p).count();
        if positive_counts[class_id] == 0 {
            continue;
        }
        items.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        ap[class_id] = grouped_ap(items, positive_counts[class_id]);
    }

    let scored: Vec<usize> = (0..num_classes).filter(|&q| positive_counts[q] > 0).collect();
    let map = if scored.is_empty() {
        0.0
    } else {
        scored.iter().map(|&q| ap[q]).sum::<f64>() / scored.len() as f64
    };

    Ok(LocReport {
        ap,
        map,
        positive_counts,
        total_timepoints,
    })
}

/// Envelope AP over a score-sorted list where runs of equal score advance the
/// precision-recall curve as a single step.
fn grouped_ap(sorted: &[(f64, bool)], num_positives: usize) -> f64 {
    let mut boundaries = Vec::new();
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            seen += 1;
            if sorted[i].1 {
                tp += 1;
            }
            i += 1;
        }
        boundaries.push((tp as f64 / num_positives as f64, tp as f64 / seen as f64));
    }
    for k in (0..boundaries.len().saturating_sub(1)).rev() {
        if boundaries[k + 1].1 > boundaries[k].1 {
            boundaries[k].1 = boundaries[k + 1].1;
        }
    }
    let mut ap = 0.0;
    let mut previous_recall = 0.0;
    for &(recall, precision) in &boundaries {
        ap += (recall - previous_recall) * precision;
        previous_recall = recall;
    }
    ap
}

/// Writes detections as comma-separated text, one per line, with times and
/// confidences at six fractional digits.
pub fn write_detections(path: impl AsRef<Path>, dets: &[Detection]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("video_id,class_id,start,end,confidence\n");
    for det in dets {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6}\n",
            det.video_id, det.class_id, det.start, det.end, det.confidence
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a detection file written by `write_detections`.
pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut dets = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if line_no == 1 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Validation {
                path: path.display().to_string(),
                line: line_no,
                detail: format!("expected 5 comma-separated fields, got {}", fields.len()),
            });
        }
        let parse_f64 = |name: &str, text: &str| -> Result<f64> {
            text.parse().map_err(|_| Error::Validation {
                path: path.display().to_string(),
                line: line_no,
                detail: format!("cannot parse {name}={text:?}"),
            })
        };
        let class_id: usize = fields[1].parse().map_err(|_| Error::Validation {
            path: path.display().to_string(),
            line: line_no,
            detail: format!("cannot parse class_id={:?}", fields[1]),
        })?;
        let start = parse_f64("start", fields[2])?;
        let end = parse_f64("end", fields[3])?;
        if end <= start {
            return Err(Error::Validation {
                path: path.display().to_string(),
                line: line_no,
                detail: format!("detection has end {end} <= start {start}"),
            });
        }
        dets.push(Detection {
            video_id: fields[0].to_string(),
            class_id,
            start,
            end,
            confidence: parse_f64("confidence", fields[4])?,
        });
    }
    Ok(dets)
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    use super::*;

    fn det(video: &str, class_id: usize, start: f64, end: f64, confidence: f64) -> Detection {
        Detection {
            video_id: video.to_string(),
            class_id,
            start,
            end,
            confidence,
        }
    }

    fn gt(video: &str, class_id: usize, start: f64, end: f64) -> GroundTruth {
        GroundTruth {
            video_id: video.to_string(),
            class_id,
            start,
            end,
        }
    }

    #[test]
    fn iou_examples() {
        assert!((interval_iou(1.0, 4.0, 2.0, 6.0) - 0.4).abs() < 1e-15);
        assert_eq!(interval_iou(3.0, 7.0, 3.0, 7.0), 1.0);
        assert_eq!(interval_iou(0.0, 2.0, 2.0, 4.0), 0.0);
        assert_eq!(interval_iou(0.0, 1.0, 5.0, 6.0), 0.0);
        assert!((interval_iou(0.0, 1.0, 0.0, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn iou_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = rng.random::<f64>() * 10.0;
            let b = a + rng.random::<f64>() * 5.0 + 0.01;
            let c = rng.random::<f64>() * 10.0;
            let d = c + rng.random::<f64>() * 5.0 + 0.01;
            let forward = interval_iou(a, b, c, d);
            let backward = interval_iou(c, d, a, b);
            assert!((forward - backward).abs() < 1e-15);
            assert!((0.0..=1.0).contains(&forward));
        }
    }

    #[test]
    fn perfect_single_detection_scores_one() {
        let dets = vec![det("v", 0, 2.0, 5.0, 0.8)];
        let gts = vec![gt("v", 0, 2.0, 5.0)];
        assert_eq!(average_precision(&dets, &gts, 0.5), 1.0);
    }

    #[test]
    fn false_positive_ahead_of_the_true_positive_halves_ap() {
        let dets = vec![det("v", 0, 20.0, 22.0, 0.9), det("v", 0, 2.0, 5.0, 0.8)];
        let gts = vec![gt("v", 0, 2.0, 5.0)];
        assert!((average_precision(&dets, &gts, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn no_detections_score_zero() {
        let gts = vec![gt("v", 0, 2.0, 5.0)];
        assert_eq!(average_precision(&[], &gts, 0.5), 0.0);
    }

    #[test]
    fn iou_exactly_at_threshold_counts_as_a_match() {
        let dets = vec![det("v", 0, 0.0, 1.0, 0.9)];
        let gts = vec![gt("v", 0, 0.0, 2.0)];
        assert_eq!(average_precision(&dets, &gts, 0.5), 1.0);
    }

    #[test]
    fn each_ground_truth_matches_at_most_once() {
        let dets = vec![det("v", 0, 0.0, 10.0, 0.9), det("v", 0, 0.0, 10.0, 0.8)];
        let gts = vec![gt("v", 0, 0.0, 10.0)];
        assert_eq!(average_precision(&dets, &gts, 0.5), 1.0);

        let dets = vec![det("v", 0, 5.0, 15.0, 0.9), det("v", 0, 0.0, 10.0, 0.8)];
        assert!((average_precision(&dets, &gts, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn matching_stays_within_the_video() {
        let dets = vec![det("a", 0, 0.0, 5.0, 0.9)];
        let gts = vec![gt("b", 0, 0.0, 5.0)];
        assert_eq!(average_precision(&dets, &gts, 0.5), 0.0);
    }

    #[test]
    fn trailing_false_positive_never_raises_ap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let mut dets = Vec::new();
            let mut gts = Vec::new();
            for g in 0..rng.random_range(1..4) {
                let start = rng.random::<f64>() * 10.0;
                gts.push(gt("v", 0, start, start + 1.0 + rng.random::<f64>()));
                let _ = g;
            }
            for _ in 0..rng.random_range(0..5) {
                let start = rng.random::<f64>() * 10.0;
                dets.push(det(
                    "v",
                    0,
                    start,
                    start + 0.5 + rng.random::<f64>() * 2.0,
                    0.2 + rng.random::<f64>() * 0.8,
                ));
            }
            let base = average_precision(&dets, &gts, 0.3);
            dets.push(det("v", 0, 1000.0, 1001.0, 0.05));
            let extended = average_precision(&dets, &gts, 0.3);
            assert!(
                extended <= base + 1e-15,
                "a trailing false positive raised AP from {base} to {extended}"
            );
        }
    }

    #[test]
    fn perfect_detections_give_map_one_everywhere() {
        let gts = vec![gt("a", 0, 0.0, 3.0), gt("a", 1, 4.0, 6.0), gt("b", 0, 1.0, 2.0)];
        let dets: Vec<Detection> = gts
            .iter()
            .map(|g| det(&g.video_id, g.class_id, g.start, g.end, 0.9))
            .collect();
        let thresholds = [0.1, 0.3, 0.5, 0.7];
        let report = detection_map(&dets, &gts, 3, &thresholds).unwrap();
        for &m in &report.map {
            assert_eq!(m, 1.0);
        }
        assert_eq!(report.ground_truth_counts, vec![2, 1, 0]);
        assert_eq!(report.detection_counts, vec![2, 1, 0]);
    }

    #[test]
    fn distant_detections_give_map_zero() {
        let gts = vec![gt("a", 0, 0.0, 3.0)];
        let dets = vec![det("a", 0, 100.0, 103.0, 0.9)];
        let report = detection_map(&dets, &gts, 1, &[0.5]).unwrap();
        assert_eq!(report.map, vec![0.0]);
    }

    #[test]
    fn classes_without_ground_truth_are_excluded_from_the_mean() {
        let gts = vec![gt("a", 0, 0.0, 3.0)];
        let dets = vec![det("a", 0, 0.0, 3.0, 0.9), det("a", 1, 5.0, 8.0, 0.9)];
        let report = detection_map(&dets, &gts, 2, &[0.5]).unwrap();
        assert_eq!(report.map, vec![1.0], "a spurious class with no ground truth changed mAP");
        assert_eq!(report.ap[1], vec![0.0]);
    }

    #[test]
    fn report_is_invariant_to_presentation_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let videos = ["a", "b", "c"];
        let mut dets = Vec::new();
        let mut gts = Vec::new();
        for video in videos {
            for _ in 0..4 {
                let start = rng.random::<f64>() * 20.0;
                gts.push(gt(video, rng.random_range(0..2), start, start + 2.0));
                let start = rng.random::<f64>() * 20.0;
                dets.push(det(
                    video,
                    rng.random_range(0..2),
                    start,
                    start + 2.0,
                    rng.random::<f64>(),
                ));
            }
        }
        let report = detection_map(&dets, &gts, 2, &[0.1, 0.5]).unwrap();
        let mut dets_rev: Vec<Detection> = dets.clone();
        dets_rev.reverse();
        let mut gts_rev: Vec<GroundTruth> = gts.clone();
        gts_rev.reverse();
        let report_rev = detection_map(&dets_rev, &gts_rev, 2, &[0.1, 0.5]).unwrap();
        assert_eq!(report.map, report_rev.map, "mAP depends on presentation order");
        assert_eq!(report.ap, report_rev.ap);
    }

    #[test]
    fn report_table_has_one_row_per_class_plus_map() {
        let gts = vec![gt("a", 0, 0.0, 3.0)];
        let dets = vec![det("a", 0, 0.0, 3.0, 0.9)];
        let report = detection_map(&dets, &gts, 2, &[0.5]).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "class,ap@0.50");
        assert_eq!(lines[1], "0,1.000000");
        assert_eq!(lines[3], "mAP,1.000000");
    }

    fn loc_video(id: &str, scores: Vec<Vec<f64>>, timestamps: Vec<f64>) -> TimepointScores {
        TimepointScores {
            video_id: id.to_string(),
            scores: Matrix::from_rows(&scores).unwrap(),
            timestamps,
        }
    }

    #[test]
    fn indicator_scores_give_localization_map_one() {
        let gts = vec![gt("a", 0, 1.0, 3.0)];
        let video = loc_video(
            "a",
            vec![vec![0.0], vec![1.0], vec![1.0], vec![0.0]],
            vec![0.0, 1.0, 2.0, 3.0],
        );
        let report = localization_map(&[video], &gts, 1).unwrap();
        assert_eq!(report.map, 1.0);
    }

    #[test]
    fn constant_scores_earn_the_positive_prevalence() {
        let gts = vec![gt("a", 0, 0.0, 1.0)];
        let video = loc_video(
            "a",
            vec![vec![0.5], vec![0.5], vec![0.5], vec![0.5]],
            vec![0.0, 1.0, 2.0, 3.0],
        );
        let report = localization_map(&[video], &gts, 1).unwrap();
        assert!((report.ap[0] - 0.25).abs() < 1e-15, "got {}", report.ap[0]);
    }

    #[test]
    fn two_video_hand_instance_matches_the_hand_computed_ap() {
        let gts = vec![gt("a", 0, 1.0, 3.0)];
        let a = loc_video(
            "a",
            vec![vec![0.1], vec![0.9], vec![0.4], vec![0.2]],
            vec![0.0, 1.0, 2.0, 3.0],
        );
        let b = loc_video(
            "b",
            vec![vec![0.7], vec![0.3], vec![0.05], vec![0.6]],
            vec![0.0, 1.0, 2.0, 3.0],
        );
        let report = localization_map(&[a, b], &gts, 1).unwrap();
        assert!((report.ap[0] - 0.75).abs() < 1e-12, "got {}", report.ap[0]);
        assert_eq!(report.positive_counts, vec![2]);
        assert_eq!(report.total_timepoints, 8);
    }

    #[test]
    fn localization_excludes_classes_without_positives() {
        let gts = vec![gt("a", 1, 0.0, 2.0)];
        let video = loc_video(
            "a",
            vec![vec![0.9, 0.8], vec![0.1, 0.7]],
            vec![0.0, 1.0],
        );
        let report = localization_map(&[video], &gts, 2).unwrap();
        assert_eq!(report.map, report.ap[1], "class 0 has no positives and must not dilute");
        assert_eq!(report.positive_counts, vec![0, 2]);
    }

    #[test]
    fn detection_file_round_trips_through_text() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("dets.csv");
        let dets = vec![
            det("train_0000", 0, 0.2, 1.4, 0.812345),
            det("train_0001", 4, 10.8, 12.2, 0.25),
        ];
        write_detections(&path, &dets).unwrap();
        let back = read_detections(&path).unwrap();
        assert_eq!(back, dets, "six fractional digits must cover frame-aligned times");
    }

    #[test]
    fn malformed_detection_lines_name_the_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("dets.csv");
        fs::write(&path, "video_id,class_id,start,end,confidence\nv,0,1.0,0.5,0.9\n").unwrap();
        match read_detections(&path).unwrap_err() {
            Error::Validation { line, .. } => assert_eq!(line, 2),
            other => panic!("expected a validation error, got {other}"),
        }
        fs::write(&path, "video_id,class_id,start,end,confidence\nv,0,1.0\n").unwrap();
        assert!(matches!(read_detections(&path).unwrap_err(), Error::Validation { .. }));
    }
}
