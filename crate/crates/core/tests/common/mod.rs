//! Reference implementations written independently of the library, used to
//! check it on random instances. Slow on purpose; clarity over speed.

#![allow(dead_code)]

pub mod suites;

use ddet_core::boxes::BBox;
use ddet_core::eval::Scored;
use ddet_core::tensor::Tensor;

/// Direct seven-loop convolution. Each output starts at zero, accumulates
/// `w * x` over channel, kernel row, kernel column (out-of-image taps read 0),
/// then adds the bias.
pub fn conv2d_naive(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
    let (n, c, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (o, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let xv = |ni: usize, ci: usize, yy: isize, xx: isize| -> f64 {
        if yy < 0 || xx < 0 || yy >= h as isize || xx >= wd as isize {
            0.0
        } else {
            x.data()[((ni * c + ci) * h + yy as usize) * wd + xx as usize]
        }
    };
    let mut out = vec![0.0; n * o * oh * ow];
    for ni in 0..n {
        for oi in 0..o {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let yy = (y * stride + ky) as isize - pad as isize;
                                let xx = (xo * stride + kx) as isize - pad as isize;
                                let wv = w.data()[((oi * c + ci) * kh + ky) * kw + kx];
                                acc += wv * xv(ni, ci, yy, xx);
                            }
                        }
                    }
                    out[((ni * o + oi) * oh + y) * ow + xo] = acc + b.data()[oi];
                }
            }
        }
    }
    Tensor::new([n, o, oh, ow], out).unwrap()
}

/// Pixel-counting IoU of boxes with integer corners.
pub fn iou_raster(a: [i32; 4], b: [i32; 4]) -> f64 {
    let inside = |r: [i32; 4], x: i32, y: i32| x >= r[0] && x < r[2] && y >= r[1] && y < r[3];
    let lo_x = a[0].min(b[0]);
    let hi_x = a[2].max(b[2]);
    let lo_y = a[1].min(b[1]);
    let hi_y = a[3].max(b[3]);
    let (mut inter, mut union) = (0u64, 0u64);
    for y in lo_y..hi_y {
        for x in lo_x..hi_x {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// IoU from first principles on real-valued corners.
pub fn iou_ref(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let area = |r: &BBox| (r.x2 - r.x1).max(0.0) * (r.y2 - r.y1).max(0.0);
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// `true` when box `i` outranks box `j`: higher score, or equal score and
/// lower index.
fn outranks(scores: &[f64], i: usize, j: usize) -> bool {
    scores[i] > scores[j] || (scores[i] == scores[j] && i < j)
}

/// Greedy NMS restated as a fixed point: repeatedly keep the best-ranked box
/// that no kept box overlaps by more than `thr`.
pub fn nms_oracle(boxes: &[BBox], scores: &[f64], thr: f64, max_out: usize) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    while kept.len() < max_out {
        let alive: Vec<usize> = (0..boxes.len())
            .filter(|&i| !kept.contains(&i) && kept.iter().all(|&k| iou_ref(&boxes[k], &boxes[i]) <= thr))
            .collect();
        let best = alive
            .iter()
            .copied()
            .find(|&i| alive.iter().all(|&j| j == i || outranks(scores, i, j)));
        match best {
            Some(i) => kept.push(i),
            None => break,
        }
    }
    kept
}

/// All-point AP by enumerating recall levels: for the k-th true positive,
/// take the best precision over every prefix holding at least k true
/// positives, weight it by `1 / n_gt`, and sum over k.
pub fn ap_oracle(flags: &[Scored], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut prefix = Vec::new();
    let mut tp = 0usize;
    for (j, s) in flags.iter().enumerate() {
        tp += s.tp as usize;
        prefix.push((tp, tp as f64 / (j + 1) as f64));
    }
    let mut ap = 0.0;
    for k in 1..=tp {
        let best = prefix
            .iter()
            .filter(|(t, _)| *t >= k)
            .map(|(_, p)| *p)
            .fold(f64::NEG_INFINITY, f64::max);
        ap += (1.0 / n_gt as f64) * best;
    }
    ap
}

/// Mined negatives by rank: a negative's rank is the number of negatives that
/// beat it (larger loss, or equal loss and lower anchor index). Those ranked
/// below the quota are kept, listed by rank.
pub fn mining_oracle(negatives: &[(usize, f64)], n_pos: usize, ratio: usize) -> Vec<usize> {
    let quota = if n_pos == 0 { 1 } else { ratio * n_pos };
    let mut ranked: Vec<(usize, usize)> = negatives
        .iter()
        .map(|&(a, l)| {
            let rank = negatives.iter().filter(|&&(b, m)| m > l || (m == l && b < a)).count();
            (rank, a)
        })
        .filter(|&(rank, _)| rank < quota)
        .collect();
    ranked.sort();
    ranked.into_iter().map(|(_, a)| a).collect()
}

/// Size of the largest one-to-one pairing of detections with ground truths
/// at IoU >= thr, by exhaustive search.
pub fn max_matching(dets: &[BBox], gts: &[BBox], thr: f64) -> usize {
    fn go(i: usize, dets: &[BBox], gts: &[BBox], used: &mut Vec<bool>, thr: f64) -> usize {
        if i == dets.len() {
            return 0;
        }
        let mut best = go(i + 1, dets, gts, used, thr);
        for g in 0..gts.len() {
            if !used[g] && iou_ref(&dets[i], &gts[g]) >= thr {
                used[g] = true;
                best = best.max(1 + go(i + 1, dets, gts, used, thr));
                used[g] = false;
            }
        }
        best
    }
    go(0, dets, gts, &mut vec![false; gts.len()], thr)
}

/// Central finite difference of `f` along every coordinate of `x`.
pub fn numeric_grad(x: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + eps;
            let up = f(&p);
            p[i] = orig - eps;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}
