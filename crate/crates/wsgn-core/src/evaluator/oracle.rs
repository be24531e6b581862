//! A deliberately naive re-derivation of average precision used to cross
//! check the production implementation. It ranks by repeated scanning,
//! simulates the greedy matching step by step, and integrates the envelope by
//! enumerating every achievable recall level, sharing no code with the fast
//! path.

use crate::error::{Error, Result};

use super::{Detection, GroundTruth};

const MAX_DETECTIONS: usize = 20;

/// Average precision by exhaustive simulation. Accepts at most twenty
/// detections; larger instances should use `average_precision`. Defined as
/// zero when there is no ground truth.
pub fn brute_force_ap(dets: &[Detection], gts: &[GroundTruth], iou_threshold: f64) -> Result<f64> {
    if dets.len() > MAX_DETECTIONS {
        return Err(Error::OracleTooLarge {
            count: dets.len(),
            limit: MAX_DETECTIONS,
        });
    }
    if gts.is_empty() {
        return Ok(0.0);
    }

    let mut remaining: Vec<usize> = (0..dets.len()).collect();
    let mut ranking = Vec::with_capacity(dets.len());
    while !remaining.is_empty() {
        let mut best_slot = 0;
        for slot in 1..remaining.len() {
            if ranks_before(&dets[remaining[slot]], &dets[remaining[best_slot]]) {
                best_slot = slot;
            }
        }
        ranking.push(remaining.remove(best_slot));
    }

    let mut taken = vec![false; gts.len()];
    let mut cumulative_tp = Vec::with_capacity(ranking.len());
    let mut tp = 0usize;
    for &d in &ranking {
        let det = &dets[d];
        let mut best_gt = None;
        let mut best_overlap = -1.0;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] || gt.video_id != det.video_id {
                continue;
            }
            let inter = (det.end.min(gt.end) - det.start.max(gt.start)).max(0.0);
            let union = (det.end - det.start) + (gt.end - gt.start) - inter;
            let overlap = if inter > 0.0 { inter / union } else { 0.0 };
            if overlap > best_overlap {
                best_overlap = overlap;
                best_gt = Some(g);
            }
        }
        if let Some(g) = best_gt {
            if best_overlap >= iou_threshold {
                taken[g] = true;
                tp += 1;
            }
        }
        cumulative_tp.push(tp);
    }

    let mut total = 0.0;
    for level in 1..=gts.len() {
        let mut best_precision = 0.0;
        for (rank, &tp_here) in cumulative_tp.iter().enumerate() {
            if tp_here >= level {
                let precision = tp_here as f64 / (rank + 1) as f64;
                if precision > best_precision {
                    best_precision = precision;
                }
            }
        }
        total += best_precision;
    }
    Ok(total / gts.len() as f64)
}

/// Ranking order: higher confidence first, then earlier start, then smaller
/// video id, then earlier input position (`remove` preserves positions).
fn ranks_before(a: &Detection, b: &Detection) -> bool {
    if a.confidence != b.confidence {
        return a.confidence > b.confidence;
    }
    if a.start != b.start {
        return a.start < b.start;
    }
    a.video_id < b.video_id
}
