//! Anchor to ground-truth assignment.

use alloc::vec;
use alloc::vec::Vec;

use crate::anchors::AnchorSet;
use crate::boxes::{iou, BBox};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorLabel {
    Positive(usize),
    Negative,
    Ignore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub labels: Vec<AnchorLabel>,
    pub n_pos: usize,
}

impl MatchResult {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.labels.iter().enumerate().filter_map(|(i, l)| match l {
            AnchorLabel::Positive(g) => Some((i, *g)),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub pos_thr: f64,
    pub neg_thr: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            pos_thr: 0.5,
            neg_thr: 0.4,
        }
    }
}

/// Threshold assignment plus a forced best anchor for every ground truth box.
///
/// Anchor `a` is positive to its highest-IoU box when that IoU reaches
/// `pos_thr`, negative below `neg_thr` and ignored in between. Afterwards each
/// box claims its highest-IoU anchor (lowest index on ties); when two boxes
/// would claim the same anchor the later one takes its next best.
pub fn match_anchors(anchors: &AnchorSet, gt: &[BBox], cfg: MatchConfig) -> Result<MatchResult> {
    match_boxes(&anchors.boxes, gt, cfg)
}

pub fn match_boxes(anchors: &[BBox], gt: &[BBox], cfg: MatchConfig) -> Result<MatchResult> {
    if anchors.is_empty() {
        return Err(Error::EmptyAnchors);
    }
    if !(0.0 <= cfg.neg_thr && cfg.neg_thr <= cfg.pos_thr && cfg.pos_thr <= 1.0) {
        return Err(invalid("thresholds", "need 0 <= neg_thr <= pos_thr <= 1"));
    }
    let mut labels = vec![AnchorLabel::Negative; anchors.len()];
    if gt.is_empty() {
        return Ok(MatchResult { labels, n_pos: 0 });
    }

    let table: Vec<f64> = anchors.iter().flat_map(|a| gt.iter().map(move |g| iou(a, g))).collect();
    let row = |a: usize| &table[a * gt.len()..(a + 1) * gt.len()];

    for (a, label) in labels.iter_mut().enumerate() {
        let (best_g, best) =
            row(a).iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (g, &v)| if v > acc.1 { (g, v) } else { acc },
            );
        *label = if best >= cfg.pos_thr {
            AnchorLabel::Positive(best_g)
        } else if best < cfg.neg_thr {
            AnchorLabel::Negative
        } else {
            AnchorLabel::Ignore
        };
    }

    let mut forced = vec![false; anchors.len()];
    for g in 0..gt.len() {
        let mut best: Option<(usize, f64)> = None;
        for a in 0..anchors.len() {
            if forced[a] {
                continue;
            }
            let v = table[a * gt.len() + g];
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((a, v));
            }
        }
        if let Some((a, _)) = best {
            forced[a] = true;
            labels[a] = AnchorLabel::Positive(g);
        }
    }

    let n_pos = labels.iter().filter(|l| matches!(l, AnchorLabel::Positive(_))).count();
    Ok(MatchResult { labels, n_pos })
}
