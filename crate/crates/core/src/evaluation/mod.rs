//! Proposal recall, tracking precision/success metrics, spatial
//! perturbation protocol, synthetic sequences and dataset ingestion.

mod appendix;
mod dataset;
mod synth;

pub use appendix::{
    appendix_a_gap, check_appendix_instances, random_instance, AppendixAInstance, AppendixGap,
};
pub use dataset::{
    format_groundtruth, load_sequence, parse_attributes, parse_groundtruth, DatasetError, Sequence,
    GROUNDTRUTH_FILE,
};
pub use synth::{synth_sequence, Occluder, SynthSequence, SynthSpec};

use serde::Serialize;
use thiserror::Error;

use crate::imaging::BoundingBox;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} predictions vs {1} ground-truth boxes")]
    LengthMismatch(usize, usize),
    #[error("empty sequence")]
    Empty,
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

/// Intersection over union of two boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.iou(b)
}

/// Recall of a proposal generator at several per-frame budgets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallCurve {
    pub budgets: Vec<usize>,
    pub recall: Vec<f64>,
    pub iou_threshold: f64,
}

impl RecallCurve {
    pub fn at(&self, budget: usize) -> Option<f64> {
        self.budgets
            .iter()
            .position(|&b| b == budget)
            .map(|i| self.recall[i])
    }

    /// `budget,recall` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("budget,recall\n");
        for (b, r) in self.budgets.iter().zip(&self.recall) {
            out.push_str(&format!("{b},{r}\n"));
        }
        out
    }
}

/// Fraction of frames whose first `budget` proposals contain a box with
/// IoU at least `iou_threshold` against that frame's ground truth.
pub fn recall_curve(
    per_frame: &[Vec<BoundingBox>],
    ground_truth: &[BoundingBox],
    iou_threshold: f64,
    budgets: &[usize],
) -> Result<RecallCurve, EvalError> {
    if per_frame.len() != ground_truth.len() {
        return Err(EvalError::LengthMismatch(per_frame.len(), ground_truth.len()));
    }
    if per_frame.is_empty() {
        return Err(EvalError::Empty);
    }
    // rank of the first hit per frame, if any
    let first_hit: Vec<Option<usize>> = per_frame
        .iter()
        .zip(ground_truth)
        .map(|(list, gt)| list.iter().position(|b| b.iou(gt) >= iou_threshold))
        .collect();
    let n = per_frame.len() as f64;
    let recall = budgets
        .iter()
        .map(|&k| first_hit.iter().filter(|h| h.is_some_and(|r| r < k)).count() as f64 / n)
        .collect();
    Ok(RecallCurve {
        budgets: budgets.to_vec(),
        recall,
        iou_threshold,
    })
}

/// Center-error threshold used for distance precision.
pub const DP_THRESHOLD_PX: f64 = 20.0;

pub fn center_error(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

fn check_lengths(track: &[BoundingBox], gt: &[BoundingBox]) -> Result<(), EvalError> {
    if track.len() != gt.len() {
        return Err(EvalError::LengthMismatch(track.len(), gt.len()));
    }
    if track.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Fraction of frames with center error at most `threshold_px`.
pub fn distance_precision(
    track: &[BoundingBox],
    gt: &[BoundingBox],
    threshold_px: f64,
) -> Result<f64, EvalError> {
    check_lengths(track, gt)?;
    let hits = track
        .iter()
        .zip(gt)
        .filter(|(t, g)| center_error(t, g) <= threshold_px)
        .count();
    Ok(hits as f64 / track.len() as f64)
}

/// Overlap thresholds `0.05, 0.10, ..., 1.00`.
pub fn success_thresholds() -> Vec<f64> {
    (1..=20).map(|k| k as f64 / 20.0).collect()
}

/// Success rate at overlap 0.5 and the mean success over the 20-point
/// threshold grid; a frame succeeds when its IoU strictly exceeds the
/// threshold.
pub fn success_metrics(track: &[BoundingBox], gt: &[BoundingBox]) -> Result<(f64, f64), EvalError> {
    check_lengths(track, gt)?;
    let ious: Vec<f64> = track.iter().zip(gt).map(|(t, g)| t.iou(g)).collect();
    let n = ious.len() as f64;
    let rate_at = |eta: f64| ious.iter().filter(|&&v| v > eta).count() as f64 / n;
    let grid = success_thresholds();
    let auc = grid.iter().map(|&eta| rate_at(eta)).sum::<f64>() / grid.len() as f64;
    Ok((rate_at(0.5), auc))
}

/// Summary of one tracked sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackEval {
    pub dp: f64,
    pub success_rate: f64,
    pub success_auc: f64,
}

pub fn evaluate_track(track: &[BoundingBox], gt: &[BoundingBox]) -> Result<TrackEval, EvalError> {
    let dp = distance_precision(track, gt, DP_THRESHOLD_PX)?;
    let (success_rate, success_auc) = success_metrics(track, gt)?;
    Ok(TrackEval {
        dp,
        success_rate,
        success_auc,
    })
}

/// Twelve perturbed initializations: eight compass shifts by 10% of the
/// box size (N, NE, E, SE, S, SW, W, NW) and four centered rescalings
/// (0.8, 0.9, 1.1, 1.2), each clipped to the frame.
pub fn sre_perturbations(init: &BoundingBox, frame_w: usize, frame_h: usize) -> Vec<BoundingBox> {
    let dx = 0.1 * init.w as f64;
    let dy = 0.1 * init.h as f64;
    let compass = [
        (0.0, -1.0),
        (1.0, -1.0),
        (1.0, 0.0),
        (1.0, 1.0),
        (0.0, 1.0),
        (-1.0, 1.0),
        (-1.0, 0.0),
        (-1.0, -1.0),
    ];
    let clip = |b: BoundingBox| b.clip(frame_w, frame_h).unwrap_or(*init);
    let mut out: Vec<BoundingBox> = compass
        .iter()
        .map(|&(sx, sy)| {
            clip(BoundingBox::new(
                init.x + (sx * dx).round() as i32,
                init.y + (sy * dy).round() as i32,
                init.w,
                init.h,
            ))
        })
        .collect();
    out.extend([0.8, 0.9, 1.1, 1.2].iter().map(|&s| clip(init.scaled(s, s))));
    out
}
