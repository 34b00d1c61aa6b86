//! Greedy non-maximum suppression.

use alloc::vec;
use alloc::vec::Vec;

use crate::boxes::{iou, BBox};

/// Indices sorted by descending score; equal scores keep the lower index first.
pub fn argsort_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Keeps the best remaining box and drops every box overlapping it by more
/// than `iou_thr`, until `max_out` boxes are kept. Returns kept indices in
/// descending-score order.
pub fn nms(boxes: &[BBox], scores: &[f64], iou_thr: f64, max_out: usize) -> Vec<usize> {
    assert_eq!(boxes.len(), scores.len(), "one score per box");
    let order = argsort_desc(scores);
    let mut suppressed = vec![false; boxes.len()];
    let mut keep = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        if keep.len() >= max_out {
            break;
        }
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        for &j in &order[rank + 1..] {
            if !suppressed[j] && iou(&boxes[i], &boxes[j]) > iou_thr {
                suppressed[j] = true;
            }
        }
    }
    keep
}
