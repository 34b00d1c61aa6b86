//! Detection quality (per-class AP and mAP at one IoU threshold) and
//! inference throughput.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

// Unused when std is linked into the build, whose inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::boxes::{iou, BBox};
use crate::error::{invalid, Error, Result};
use crate::model::Detection;

/// A detection tagged with the frame it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameDetection {
    pub frame: usize,
    pub detection: Detection,
}

/// Ground truth box of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGt {
    pub frame: usize,
    pub bbox: BBox,
    pub class_id: usize,
}

/// True/false positive decision for one detection of a class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub score: f64,
    pub tp: bool,
}

/// Greedy matching of one class's detections, given in descending score
/// order. Each detection takes the highest-IoU unmatched ground truth of its
/// frame (lowest index on ties) if that IoU reaches `iou_thr`.
pub fn match_class(dets: &[(usize, BBox, f64)], gts: &[(usize, BBox)], iou_thr: f64) -> Vec<Scored> {
    let mut used = vec![false; gts.len()];
    dets.iter()
        .map(|&(frame, bbox, score)| {
            let mut best: Option<(usize, f64)> = None;
            for (g, &(gf, gb)) in gts.iter().enumerate() {
                if gf != frame || used[g] {
                    continue;
                }
                let v = iou(&bbox, &gb);
                if v >= iou_thr && best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            if let Some((g, _)) = best {
                used[g] = true;
            }
            Scored {
                score,
                tp: best.is_some(),
            }
        })
        .collect()
}

/// Per-class TP/FP labels, detections of each class sorted by descending
/// score (ties by input order).
pub fn match_detections_to_gt(
    detections: &[FrameDetection],
    gt: &[FrameGt],
    iou_thr: f64,
) -> BTreeMap<usize, Vec<Scored>> {
    let mut classes: BTreeMap<usize, Vec<Scored>> = BTreeMap::new();
    let mut ids: Vec<usize> = detections
        .iter()
        .map(|d| d.detection.class_id)
        .chain(gt.iter().map(|g| g.class_id))
        .collect();
    ids.sort_unstable();
    ids.dedup();
    for class_id in ids {
        let mut dets: Vec<(usize, BBox, f64)> = detections
            .iter()
            .filter(|d| d.detection.class_id == class_id)
            .map(|d| (d.frame, d.detection.bbox, d.detection.score))
            .collect();
        dets.sort_by(|a, b| b.2.total_cmp(&a.2));
        let gts: Vec<(usize, BBox)> = gt
            .iter()
            .filter(|g| g.class_id == class_id)
            .map(|g| (g.frame, g.bbox))
            .collect();
        classes.insert(class_id, match_class(&dets, &gts, iou_thr));
    }
    classes
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub score: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall after each detection, in the given order.
pub fn pr_curve(flags: &[Scored], n_gt: usize) -> Vec<PrPoint> {
    let mut tp = 0usize;
    flags
        .iter()
        .enumerate()
        .map(|(i, s)| {
            tp += s.tp as usize;
            PrPoint {
                score: s.score,
                precision: tp as f64 / (i + 1) as f64,
                recall: if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApMethod {
    /// Area under the monotone precision envelope.
    #[default]
    AllPoint,
    /// Mean envelope precision at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

/// Average precision of score-sorted TP/FP flags; zero when `n_gt == 0`.
pub fn average_precision(flags: &[Scored], n_gt: usize, method: ApMethod) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let curve = pr_curve(flags, n_gt);
    let mut envelope: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    match method {
        ApMethod::AllPoint => {
            let step = 1.0 / n_gt as f64;
            let mut ap = 0.0;
            for (s, &p) in flags.iter().zip(&envelope) {
                if s.tp {
                    ap += step * p;
                }
            }
            ap
        }
        ApMethod::ElevenPoint => {
            let mut ap = 0.0;
            for t in 0..=10 {
                let r = t as f64 / 10.0;
                let p = curve
                    .iter()
                    .zip(&envelope)
                    .find(|(pt, _)| pt.recall >= r - 1e-12)
                    .map_or(0.0, |(_, &e)| e);
                ap += p / 11.0;
            }
            ap
        }
    }
}

/// Unweighted mean AP over classes that have ground truth.
pub fn mean_ap(per_class: &[(f64, usize)]) -> Result<f64> {
    let with_gt: Vec<f64> = per_class.iter().filter(|(_, n)| *n > 0).map(|(ap, _)| *ap).collect();
    if with_gt.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    Ok(with_gt.iter().sum::<f64>() / with_gt.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassResult {
    pub ap: f64,
    pub n_gt: usize,
    pub pr: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub per_class: BTreeMap<usize, ClassResult>,
    pub map: f64,
    pub iou_threshold: f64,
}

/// Matches, scores and averages detections against ground truth for classes
/// `0..num_classes`.
pub fn evaluate(
    detections: &[FrameDetection],
    gt: &[FrameGt],
    num_classes: usize,
    iou_thr: f64,
    method: ApMethod,
) -> Result<EvalResult> {
    if !(0.0..=1.0).contains(&iou_thr) {
        return Err(invalid("iou_thr", "must lie in [0, 1]"));
    }
    let matched = match_detections_to_gt(detections, gt, iou_thr);
    let mut per_class = BTreeMap::new();
    for class_id in 0..num_classes {
        let n_gt = gt.iter().filter(|g| g.class_id == class_id).count();
        let flags = matched.get(&class_id).map(Vec::as_slice).unwrap_or(&[]);
        per_class.insert(
            class_id,
            ClassResult {
                ap: average_precision(flags, n_gt, method),
                n_gt,
                pr: pr_curve(flags, n_gt),
            },
        );
    }
    let pairs: Vec<(f64, usize)> = per_class.values().map(|c| (c.ap, c.n_gt)).collect();
    Ok(EvalResult {
        map: mean_ap(&pairs)?,
        per_class,
        iou_threshold: iou_thr,
    })
}

/// Monotonic time source in seconds.
pub trait Clock {
    fn now(&mut self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpsStats {
    pub mean_fps: f64,
    pub std_fps: f64,
    pub per_run_seconds: Vec<f64>,
    pub warmup_runs: usize,
    pub measured_runs: usize,
}

/// Times `runs` sequential calls of `infer` after `warmup` untimed ones.
///
/// `mean_fps = runs / sum(seconds)`; `std_fps` is the population standard
/// deviation of the per-run rates `1 / seconds`.
pub fn fps_benchmark<C, F, E>(
    mut infer: F,
    clock: &mut C,
    warmup: usize,
    runs: usize,
) -> core::result::Result<FpsStats, E>
where
    C: Clock,
    F: FnMut() -> core::result::Result<(), E>,
    E: From<Error>,
{
    if runs < 2 {
        return Err(invalid("runs", "at least two measured runs are required").into());
    }
    for _ in 0..warmup {
        infer()?;
    }
    let mut per_run_seconds = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t0 = clock.now();
        infer()?;
        let dt = clock.now() - t0;
        if !(dt > 0.0) {
            return Err(Error::ZeroDuration(dt).into());
        }
        per_run_seconds.push(dt);
    }
    Ok(fps_stats(per_run_seconds, warmup))
}

pub fn fps_stats(per_run_seconds: Vec<f64>, warmup_runs: usize) -> FpsStats {
    let runs = per_run_seconds.len();
    let total: f64 = per_run_seconds.iter().sum();
    let rates: Vec<f64> = per_run_seconds.iter().map(|s| 1.0 / s).collect();
    let mean_rate = rates.iter().sum::<f64>() / runs as f64;
    let var = rates.iter().map(|r| (r - mean_rate).powi(2)).sum::<f64>() / runs as f64;
    FpsStats {
        mean_fps: runs as f64 / total,
        std_fps: var.sqrt(),
        per_run_seconds,
        warmup_runs,
        measured_runs: runs,
    }
}
