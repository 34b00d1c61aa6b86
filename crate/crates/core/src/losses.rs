//! Classification and box-regression losses for the dense detector.
//!
//! Classification uses one sigmoid per (anchor, class). With `z = x` for the
//! true class and `z = -x` otherwise, the focal term is
//!
//! ```text
//! FL(z) = alpha_t * exp(-gamma * softplus(z)) * softplus(-z)
//! ```
//!
//! which is `-alpha_t * (1 - p_t)^gamma * ln(p_t)` written without ever taking
//! the log of a rounded probability. `gamma = 0, alpha_t = 1` is plain binary
//! cross-entropy.

use alloc::vec;
use alloc::vec::Vec;

// Unused when std is linked into the build, whose inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::boxes::{encode, BBox};
use crate::error::{invalid, Error, Result};
use crate::matching::{AnchorLabel, MatchResult};
use crate::scalar::{sigmoid, softplus};

/// How the classification term treats the background pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClsMode {
    /// Focal loss over every non-ignored anchor.
    Focal,
    /// Cross-entropy over positives plus the hardest negatives only.
    HardNegativeCe,
    /// Cross-entropy over every non-ignored anchor, no reweighting, no mining.
    PlainCe,
}

impl ClsMode {
    pub fn name(self) -> &'static str {
        match self {
            ClsMode::Focal => "focal",
            ClsMode::HardNegativeCe => "hard_negative_ce",
            ClsMode::PlainCe => "plain_ce",
        }
    }

    pub fn parse(s: &str) -> Option<ClsMode> {
        match s {
            "focal" => Some(ClsMode::Focal),
            "hard_negative_ce" => Some(ClsMode::HardNegativeCe),
            "plain_ce" => Some(ClsMode::PlainCe),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub neg_pos_ratio: usize,
    pub smooth_l1_beta: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            gamma: 2.0,
            alpha: 0.25,
            neg_pos_ratio: 3,
            smooth_l1_beta: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", "must be non-negative"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1)"));
        }
        if self.neg_pos_ratio < 1 {
            return Err(invalid("neg_pos_ratio", "must be at least 1"));
        }
        if !(self.smooth_l1_beta > 0.0) {
            return Err(invalid("smooth_l1_beta", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorLoss {
    pub anchor: usize,
    pub is_foreground: bool,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossReport {
    pub total: f64,
    pub cls: f64,
    pub reg: f64,
    pub n_pos: usize,
    /// Classification loss of every anchor that contributes to `cls`.
    pub per_anchor_cls_loss: Vec<AnchorLoss>,
}

/// Focal term with an explicit class weight `alpha_t`.
#[inline]
pub fn focal_term(logit: f64, is_foreground: bool, gamma: f64, alpha_t: f64) -> f64 {
    let z = if is_foreground { logit } else { -logit };
    alpha_t * (-gamma * softplus(z)).exp() * softplus(-z)
}

/// Derivative of [`focal_term`] with respect to the logit.
#[inline]
pub fn focal_term_grad(logit: f64, is_foreground: bool, gamma: f64, alpha_t: f64) -> f64 {
    let z = if is_foreground { logit } else { -logit };
    let modulating = (-gamma * softplus(z)).exp();
    let dz = alpha_t * modulating * (-gamma * sigmoid(z) * softplus(-z) - sigmoid(-z));
    if is_foreground {
        dz
    } else {
        -dz
    }
}

#[inline]
pub fn alpha_t(is_foreground: bool, alpha: f64) -> f64 {
    if is_foreground {
        alpha
    } else {
        1.0 - alpha
    }
}

/// Focal loss of one binary prediction.
pub fn focal_loss(logit: f64, is_foreground: bool, gamma: f64, alpha: f64) -> Result<f64> {
    if !logit.is_finite() {
        return Err(Error::NonFinite("focal_loss"));
    }
    if !(gamma >= 0.0) {
        return Err(invalid("gamma", "must be non-negative"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", "must lie in (0, 1)"));
    }
    Ok(focal_term(logit, is_foreground, gamma, alpha_t(is_foreground, alpha)))
}

/// Binary cross-entropy from a logit.
#[inline]
pub fn bce(logit: f64, is_foreground: bool) -> f64 {
    focal_term(logit, is_foreground, 0.0, 1.0)
}

/// Batched focal loss over `anchors x classes` logits with one-hot targets
/// (`None` is background for every class).
pub fn focal_loss_batch(
    logits: &[f64],
    targets: &[Option<usize>],
    num_classes: usize,
    gamma: f64,
    alpha: f64,
) -> Result<f64> {
    if logits.len() != targets.len() * num_classes {
        return Err(Error::ShapeMismatch {
            op: "focal_loss_batch",
            expected: vec![targets.len(), num_classes],
            got: vec![logits.len()],
        });
    }
    let mut sum = 0.0;
    for (row, t) in logits.chunks_exact(num_classes).zip(targets) {
        for (k, &x) in row.iter().enumerate() {
            sum += focal_loss(x, *t == Some(k), gamma, alpha)?;
        }
    }
    Ok(sum)
}

pub fn smooth_l1(x: f64, beta: f64) -> f64 {
    let ax = x.abs();
    if ax < beta {
        0.5 * x * x / beta
    } else {
        ax - 0.5 * beta
    }
}

pub fn smooth_l1_grad(x: f64, beta: f64) -> f64 {
    if x.abs() < beta {
        x / beta
    } else {
        x.signum()
    }
}

/// Picks the negatives kept by hard-negative mining: the `ratio * n_pos`
/// largest losses (one when there are no positives), ties broken by lower
/// anchor index. Returns anchor indices in selection order.
pub fn select_hard_negatives(negatives: &[(usize, f64)], n_pos: usize, ratio: usize) -> Vec<usize> {
    let quota = if n_pos == 0 { 1 } else { ratio * n_pos };
    let mut ranked: Vec<(usize, f64)> = negatives.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(quota);
    ranked.into_iter().map(|(a, _)| a).collect()
}

/// Classification loss with its gradient with respect to the logits.
pub struct ClsLoss {
    /// Sum over counted anchors, before normalization.
    pub sum: f64,
    pub per_anchor: Vec<AnchorLoss>,
    pub grad: Vec<f64>,
}

fn target_class(label: AnchorLabel, gt_classes: &[usize]) -> Option<usize> {
    match label {
        AnchorLabel::Positive(g) => Some(gt_classes[g]),
        _ => None,
    }
}

fn anchor_bce(row: &[f64], target: Option<usize>, grad: Option<&mut [f64]>) -> f64 {
    let mut loss = 0.0;
    match grad {
        Some(g) => {
            for (k, (&x, gk)) in row.iter().zip(g.iter_mut()).enumerate() {
                let fg = target == Some(k);
                loss += bce(x, fg);
                *gk = focal_term_grad(x, fg, 0.0, 1.0);
            }
        }
        None => {
            for (k, &x) in row.iter().enumerate() {
                loss += bce(x, target == Some(k));
            }
        }
    }
    loss
}

/// Cross-entropy over positives plus mined negatives, unnormalized.
pub fn ce_hard_negative_loss(
    logits: &[f64],
    num_classes: usize,
    matches: &MatchResult,
    gt_classes: &[usize],
    neg_pos_ratio: usize,
) -> Result<ClsLoss> {
    check_cls_shape(logits, num_classes, matches)?;
    let mut grad = vec![0.0; logits.len()];
    let mut per_anchor = Vec::new();
    let mut sum = 0.0;
    let mut negatives = Vec::new();
    for (a, &label) in matches.labels.iter().enumerate() {
        let row = &logits[a * num_classes..(a + 1) * num_classes];
        match label {
            AnchorLabel::Positive(_) => {
                let target = target_class(label, gt_classes);
                let g = &mut grad[a * num_classes..(a + 1) * num_classes];
                let loss = anchor_bce(row, target, Some(g));
                sum += loss;
                per_anchor.push(AnchorLoss {
                    anchor: a,
                    is_foreground: true,
                    loss,
                });
            }
            AnchorLabel::Negative => negatives.push((a, anchor_bce(row, None, None))),
            AnchorLabel::Ignore => {}
        }
    }
    let mut chosen = select_hard_negatives(&negatives, matches.n_pos, neg_pos_ratio);
    chosen.sort_unstable();
    for a in chosen {
        let row = &logits[a * num_classes..(a + 1) * num_classes];
        let g = &mut grad[a * num_classes..(a + 1) * num_classes];
        let loss = anchor_bce(row, None, Some(g));
        sum += loss;
        per_anchor.push(AnchorLoss {
            anchor: a,
            is_foreground: false,
            loss,
        });
    }
    per_anchor.sort_by_key(|l| l.anchor);
    Ok(ClsLoss { sum, per_anchor, grad })
}

/// Focal (or, with `gamma = 0` and `alpha_t = 1`, plain cross-entropy) loss
/// over every non-ignored anchor, unnormalized.
pub fn dense_cls_loss(
    logits: &[f64],
    num_classes: usize,
    matches: &MatchResult,
    gt_classes: &[usize],
    gamma: f64,
    alpha: Option<f64>,
) -> Result<ClsLoss> {
    check_cls_shape(logits, num_classes, matches)?;
    let mut grad = vec![0.0; logits.len()];
    let mut per_anchor = Vec::new();
    let mut sum = 0.0;
    for (a, &label) in matches.labels.iter().enumerate() {
        if label == AnchorLabel::Ignore {
            continue;
        }
        let target = target_class(label, gt_classes);
        let mut loss = 0.0;
        for k in 0..num_classes {
            let i = a * num_classes + k;
            let fg = target == Some(k);
            let at = alpha.map_or(1.0, |al| alpha_t(fg, al));
            loss += focal_term(logits[i], fg, gamma, at);
            grad[i] = focal_term_grad(logits[i], fg, gamma, at);
        }
        sum += loss;
        per_anchor.push(AnchorLoss {
            anchor: a,
            is_foreground: target.is_some(),
            loss,
        });
    }
    Ok(ClsLoss { sum, per_anchor, grad })
}

fn check_cls_shape(logits: &[f64], num_classes: usize, matches: &MatchResult) -> Result<()> {
    if num_classes == 0 || logits.len() != matches.len() * num_classes {
        return Err(Error::ShapeMismatch {
            op: "classification loss",
            expected: vec![matches.len(), num_classes],
            got: vec![logits.len()],
        });
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("classification logits"));
    }
    Ok(())
}

/// Ground truth of one image as seen by the loss.
#[derive(Debug, Clone, Copy)]
pub struct GtRef<'a> {
    pub boxes: &'a [BBox],
    pub classes: &'a [usize],
}

/// Full per-image loss and its gradients with respect to the flattened head
/// outputs (`anchors x classes` logits, `anchors x 4` deltas).
pub struct DetectionLoss {
    pub report: LossReport,
    pub cls_grad: Vec<f64>,
    pub reg_grad: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn detection_loss(
    cls_logits: &[f64],
    reg_deltas: &[f64],
    num_classes: usize,
    anchors: &[BBox],
    matches: &MatchResult,
    gt: GtRef<'_>,
    cfg: &LossConfig,
    mode: ClsMode,
) -> Result<DetectionLoss> {
    cfg.validate()?;
    if anchors.len() != matches.len() || reg_deltas.len() != anchors.len() * 4 {
        return Err(Error::ShapeMismatch {
            op: "detection_loss",
            expected: vec![matches.len(), 4],
            got: vec![anchors.len(), reg_deltas.len()],
        });
    }
    if gt.boxes.len() != gt.classes.len() {
        return Err(invalid("gt", "one class per box is required"));
    }
    if let Some(&k) = gt.classes.iter().find(|&&k| k >= num_classes) {
        return Err(invalid("gt", alloc::format!("class {k} outside [0, {num_classes})")));
    }
    let norm = matches.n_pos.max(1) as f64;

    let cls = match mode {
        ClsMode::Focal => dense_cls_loss(cls_logits, num_classes, matches, gt.classes, cfg.gamma, Some(cfg.alpha))?,
        ClsMode::PlainCe => dense_cls_loss(cls_logits, num_classes, matches, gt.classes, 0.0, None)?,
        ClsMode::HardNegativeCe => {
            ce_hard_negative_loss(cls_logits, num_classes, matches, gt.classes, cfg.neg_pos_ratio)?
        }
    };

    let mut reg_sum = 0.0;
    let mut reg_grad = vec![0.0; reg_deltas.len()];
    for (a, g) in matches.positives() {
        let target = encode(&anchors[a], &gt.boxes[g])?;
        for d in 0..4 {
            let diff = reg_deltas[a * 4 + d] - target[d];
            reg_sum += smooth_l1(diff, cfg.smooth_l1_beta);
            reg_grad[a * 4 + d] = smooth_l1_grad(diff, cfg.smooth_l1_beta) / norm;
        }
    }
    if reg_deltas.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression deltas"));
    }

    let cls_value = cls.sum / norm;
    let reg_value = reg_sum / norm;
    let cls_grad = cls.grad.into_iter().map(|g| g / norm).collect();
    Ok(DetectionLoss {
        report: LossReport {
            total: cls_value + reg_value,
            cls: cls_value,
            reg: reg_value,
            n_pos: matches.n_pos,
            per_anchor_cls_loss: cls.per_anchor,
        },
        cls_grad,
        reg_grad,
    })
}
