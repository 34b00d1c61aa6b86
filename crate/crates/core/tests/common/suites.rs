//! Randomized check suites shared by the integration tests and the
//! acceptance runner. Each returns a summary or a description of the first
//! failure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ddet_core::anchors::{generate_anchors, PyramidConfig};
use ddet_core::boxes::{iou, BBox};
use ddet_core::cdf::{cdf_gamma_sweep, synthetic_logit_population, Population};
use ddet_core::eval::{average_precision, match_class, ApMethod, Scored};
use ddet_core::graph::Graph;
use ddet_core::losses::{
    bce, detection_loss, focal_loss, focal_term, focal_term_grad, select_hard_negatives, smooth_l1, smooth_l1_grad,
    ClsMode, GtRef, LossConfig,
};
use ddet_core::matching::{match_boxes, MatchConfig};
use ddet_core::model::{DetectorConfig, Params};
use ddet_core::nms::nms;
use ddet_core::ops;
use ddet_core::tensor::Tensor;
use ddet_core::train::{loss_and_grads, Target};

use super::*;

const EPS: f64 = 1e-6;
/// Losses summed over thousands of anchors round at about 1e-15 of their
/// total, so a tiny step drowns small per-logit gradients in that noise.
const LOSS_EPS: f64 = 1e-3;
const NET_EPS: f64 = 1e-4;
const FLOOR: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-4;

/// Outcome of one gradient family.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub name: &'static str,
    pub points: usize,
    pub coords: usize,
    pub max_rel: f64,
}

impl GradCheck {
    fn new(name: &'static str) -> Self {
        GradCheck {
            name,
            points: 0,
            coords: 0,
            max_rel: 0.0,
        }
    }

    fn compare(&mut self, analytic: &[f64], numeric: &[f64]) {
        assert_eq!(analytic.len(), numeric.len());
        for (&a, &n) in analytic.iter().zip(numeric) {
            self.max_rel = self.max_rel.max(rel_err(a, n, FLOOR));
        }
        self.coords += analytic.len();
    }

    pub fn passed(&self) -> bool {
        self.points >= 20 && self.max_rel <= GRAD_TOL
    }
}

fn randn(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect()
}

fn t(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
    Tensor::new(shape, data).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conv_check(rng: &mut ChaCha8Rng) -> GradCheck {
    let mut c = GradCheck::new("conv2d (input, weight, bias)");
    for _ in 0..24 {
        let k = if rng.random_bool(0.5) { 3 } else { 1 };
        let stride = rng.random_range(1..=2);
        let pad = if k == 3 { rng.random_range(0..=1) } else { 0 };
        let (n, ci, co) = (
            rng.random_range(1..=2),
            rng.random_range(1..=3),
            rng.random_range(1..=3),
        );
        let (h, w) = (rng.random_range(3..=6), rng.random_range(3..=6));
        let x = randn(rng, n * ci * h * w, 1.0);
        let wt = randn(rng, co * ci * k * k, 1.0);
        let b = randn(rng, co, 1.0);
        let (xs, ws, bs) = ([n, ci, h, w], [co, ci, k, k], [co]);
        let y = ops::conv2d(&t(&xs, x.clone()), &t(&ws, wt.clone()), &t(&bs, b.clone()), stride, pad).unwrap();
        let r = randn(rng, y.len(), 1.0);
        let g = ops::conv2d_backward(
            &t(&xs, x.clone()),
            &t(&ws, wt.clone()),
            &t(&bs, b.clone()),
            stride,
            pad,
            &t(y.shape(), r.clone()),
        )
        .unwrap();
        let loss = |x: &[f64], wt: &[f64], b: &[f64]| {
            let y = ops::conv2d(
                &t(&xs, x.to_vec()),
                &t(&ws, wt.to_vec()),
                &t(&bs, b.to_vec()),
                stride,
                pad,
            )
            .unwrap();
            dot(y.data(), &r)
        };
        c.compare(g.input.data(), &numeric_grad(&x, EPS, |p| loss(p, &wt, &b)));
        c.compare(g.weight.data(), &numeric_grad(&wt, EPS, |p| loss(&x, p, &b)));
        c.compare(g.bias.data(), &numeric_grad(&b, EPS, |p| loss(&x, &wt, p)));
        c.points += 1;
    }
    c
}

/// Values kept at least `margin` away from zero so the ReLU kink is never
/// straddled by the difference quotient.
fn away_from_zero(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(margin..2.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect()
}

fn elementwise_checks(rng: &mut ChaCha8Rng) -> Vec<GradCheck> {
    let mut relu = GradCheck::new("relu");
    let mut sig = GradCheck::new("sigmoid");
    let mut up = GradCheck::new("upsample2x");
    for _ in 0..20 {
        let shape = [
            1,
            rng.random_range(1..=3),
            rng.random_range(1..=4),
            rng.random_range(1..=4),
        ];
        let n: usize = shape.iter().product();
        let x = away_from_zero(rng, n, 0.01);
        let r = randn(rng, n, 1.0);
        let rt = t(&shape, r.clone());
        let a = ops::relu_backward(&t(&shape, x.clone()), &rt);
        relu.compare(
            a.data(),
            &numeric_grad(&x, EPS, |p| dot(ops::relu(&t(&shape, p.to_vec())).data(), &r)),
        );
        relu.points += 1;

        let x = randn(rng, n, 6.0);
        let y = ops::sigmoid(&t(&shape, x.clone()));
        let a = ops::sigmoid_backward(&y, &rt);
        sig.compare(
            a.data(),
            &numeric_grad(&x, EPS, |p| dot(ops::sigmoid(&t(&shape, p.to_vec())).data(), &r)),
        );
        sig.points += 1;

        let r4 = randn(rng, 4 * n, 1.0);
        let up_shape = [shape[0], shape[1], 2 * shape[2], 2 * shape[3]];
        let a = ops::upsample_nearest2x_backward(&t(&up_shape, r4.clone())).unwrap();
        up.compare(
            a.data(),
            &numeric_grad(&x, EPS, |p| {
                dot(ops::upsample_nearest2x(&t(&shape, p.to_vec())).unwrap().data(), &r4)
            }),
        );
        up.points += 1;
    }
    vec![relu, sig, up]
}

/// A small graph using every op: two convolutions, relu, upsample, add,
/// sigmoid and sum. Checks gradients of all named parameters.
fn graph_check(rng: &mut ChaCha8Rng) -> GradCheck {
    let mut c = GradCheck::new("graph (conv, relu, upsample, add, sigmoid, sum)");
    for _ in 0..20 {
        let x = randn(rng, 2 * 4 * 4, 1.0);
        let params: Vec<(&str, Vec<usize>)> = vec![
            ("w1", vec![3, 2, 3, 3]),
            ("b1", vec![3]),
            ("w2", vec![3, 3, 1, 1]),
            ("b2", vec![3]),
        ];
        let values: Vec<Vec<f64>> = params
            .iter()
            .map(|(_, s)| randn(rng, s.iter().product(), 0.7))
            .collect();
        let build = |vals: &[Vec<f64>]| {
            let mut g = Graph::new();
            let xi = g.input(t(&[1, 2, 4, 4], x.clone()));
            let ids: Vec<_> = params
                .iter()
                .zip(vals)
                .map(|((n, s), v)| g.param(*n, t(s, v.clone())))
                .collect();
            let h = g.conv2d(xi, ids[0], ids[1], 2, 1).unwrap();
            let h = g.relu(h);
            let lat = g.conv2d(h, ids[2], ids[3], 1, 0).unwrap();
            let upd = g.upsample2x(lat).unwrap();
            let skip = g.upsample2x(h).unwrap();
            let s = g.add(upd, skip).unwrap();
            let s = g.sigmoid(s);
            let l = g.sum(s);
            (g, l)
        };
        let (g, l) = build(&values);
        let grads = g.backward(l).unwrap();
        for (i, (name, _)) in params.iter().enumerate() {
            let num = numeric_grad(&values[i], 1e-5, |p| {
                let mut v = values.clone();
                v[i] = p.to_vec();
                let (g, l) = build(&v);
                g.value(l).item()
            });
            c.compare(grads.get(name).unwrap().data(), &num);
        }
        c.points += 1;
    }
    c
}

fn scalar_loss_checks(rng: &mut ChaCha8Rng) -> Vec<GradCheck> {
    let mut focal = GradCheck::new("focal loss term");
    let mut sl1 = GradCheck::new("smooth L1");
    for _ in 0..40 {
        let x: f64 = rng.random_range(-8.0..8.0);
        let fg = rng.random_bool(0.5);
        let gamma: f64 = rng.random_range(0.0..3.0);
        let at: f64 = rng.random_range(0.05..1.0);
        let a = focal_term_grad(x, fg, gamma, at);
        let n = numeric_grad(&[x], EPS, |p| focal_term(p[0], fg, gamma, at));
        focal.compare(&[a], &n);
        focal.points += 1;

        let beta: f64 = rng.random_range(0.2..2.0);
        let mut d: f64 = rng.random_range(-3.0..3.0);
        if (d.abs() - beta).abs() < 0.01 {
            d += 0.05;
        }
        let a = smooth_l1_grad(d, beta);
        let n = numeric_grad(&[d], EPS, |p| smooth_l1(p[0], beta));
        sl1.compare(&[a], &n);
        sl1.points += 1;
    }
    vec![focal, sl1]
}

fn random_gt(rng: &mut ChaCha8Rng, size: f64) -> (Vec<BBox>, Vec<usize>) {
    let n = rng.random_range(1..=3);
    let boxes = (0..n)
        .map(|_| {
            let w = rng.random_range(0.25 * size..0.6 * size);
            let h = rng.random_range(0.25 * size..0.6 * size);
            let x = rng.random_range(0.0..size - w);
            let y = rng.random_range(0.0..size - h);
            BBox::new(x, y, x + w, y + h)
        })
        .collect();
    let classes = (0..n).map(|_| rng.random_range(0..3)).collect();
    (boxes, classes)
}

fn detection_loss_check(rng: &mut ChaCha8Rng, mode: ClsMode, name: &'static str) -> GradCheck {
    let mut c = GradCheck::new(name);
    let anchors = generate_anchors(32, 32, &PyramidConfig::default()).unwrap();
    let k = 3;
    let cfg = LossConfig::default();
    for _ in 0..20 {
        let (boxes, classes) = random_gt(rng, 32.0);
        let m = match_boxes(&anchors.boxes, &boxes, MatchConfig::default()).unwrap();
        let logits: Vec<f64> = randn(rng, anchors.len() * k, 4.0).iter().map(|v| v - 2.0).collect();
        let deltas = randn(rng, anchors.len() * 4, 0.5);
        let gt = GtRef {
            boxes: &boxes,
            classes: &classes,
        };
        let eval = |l: &[f64], d: &[f64]| {
            detection_loss(l, d, k, &anchors.boxes, &m, gt, &cfg, mode)
                .unwrap()
                .report
                .total
        };
        let out = detection_loss(&logits, &deltas, k, &anchors.boxes, &m, gt, &cfg, mode).unwrap();
        // Every positive anchor's logits and deltas, plus random others.
        let mut cls_idx: Vec<usize> = m.positives().flat_map(|(a, _)| a * k..a * k + k).collect();
        let mut reg_idx: Vec<usize> = m.positives().flat_map(|(a, _)| a * 4..a * 4 + 4).collect();
        cls_idx.extend((0..15).map(|_| rng.random_range(0..logits.len())));
        reg_idx.extend((0..5).map(|_| rng.random_range(0..deltas.len())));
        for &i in &cls_idx {
            let n = numeric_grad(&[logits[i]], LOSS_EPS, |p| {
                let mut l = logits.clone();
                l[i] = p[0];
                eval(&l, &deltas)
            });
            c.compare(&[out.cls_grad[i]], &n);
        }
        for &i in &reg_idx {
            let n = numeric_grad(&[deltas[i]], LOSS_EPS, |p| {
                let mut d = deltas.clone();
                d[i] = p[0];
                eval(&logits, &d)
            });
            c.compare(&[out.reg_grad[i]], &n);
        }
        c.points += 1;
    }
    c
}

/// End-to-end: every parameter family of the detector through the graph and
/// the batch loss, on 16x16 images.
fn model_check(rng: &mut ChaCha8Rng) -> GradCheck {
    let mut c = GradCheck::new("detector parameters (backbone, pyramid, heads, loss)");
    let det = DetectorConfig::new(3);
    let cfg = LossConfig::default();
    for instance in 0..4u64 {
        let params = Params::<f64>::init(&det, 100 + instance).unwrap();
        let images = t(&[2, 3, 16, 16], randn(rng, 2 * 3 * 256, 1.0));
        let targets: Vec<Target> = (0..2)
            .map(|_| {
                let (boxes, classes) = random_gt(rng, 16.0);
                Target { boxes, classes }
            })
            .collect();
        let (_, grads) = loss_and_grads(&params, &images, &targets, &det, &cfg, ClsMode::Focal).unwrap();
        let names: Vec<String> = params.tensors.keys().cloned().collect();
        for _ in 0..6 {
            let name = &names[rng.random_range(0..names.len())];
            let len = params.tensors[name].len();
            let i = rng.random_range(0..len);
            let n = numeric_grad(&[params.tensors[name].data()[i]], NET_EPS, |p| {
                let mut q = params.clone();
                q.tensors.get_mut(name).unwrap().data_mut()[i] = p[0];
                loss_and_grads(&q, &images, &targets, &det, &cfg, ClsMode::Focal)
                    .unwrap()
                    .0
                    .total
            });
            c.compare(&[grads.get(name).unwrap().data()[i]], &n);
            c.points += 1;
        }
    }
    c
}

/// Every differentiable op and both detection-loss modes against central
/// differences in f64.
pub fn gradient_suite(seed: u64) -> Vec<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![conv_check(&mut rng)];
    out.extend(elementwise_checks(&mut rng));
    out.push(graph_check(&mut rng));
    out.extend(scalar_loss_checks(&mut rng));
    out.push(detection_loss_check(
        &mut rng,
        ClsMode::Focal,
        "detection loss, focal mode",
    ));
    out.push(detection_loss_check(
        &mut rng,
        ClsMode::HardNegativeCe,
        "detection loss, hard-negative CE mode",
    ));
    out.push(detection_loss_check(
        &mut rng,
        ClsMode::PlainCe,
        "detection loss, plain CE mode",
    ));
    out.push(model_check(&mut rng));
    out
}

fn random_box(rng: &mut ChaCha8Rng) -> BBox {
    let x = rng.random_range(0.0..40.0);
    let y = rng.random_range(0.0..40.0);
    BBox::new(x, y, x + rng.random_range(1.0..25.0), y + rng.random_range(1.0..25.0))
}

pub fn nms_equivalence(instances: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..instances {
        let n = rng.random_range(0..=12);
        let boxes: Vec<BBox> = (0..n).map(|_| random_box(&mut rng)).collect();
        // Coarse scores so ties occur.
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 / 8.0).collect();
        let thr = [0.3, 0.5, 0.7][rng.random_range(0..3)];
        let max_out = rng.random_range(1..=12);
        let got = nms(&boxes, &scores, thr, max_out);
        let want = nms_oracle(&boxes, &scores, thr, max_out);
        if got != want {
            return Err(format!("case {case}: nms {got:?} vs oracle {want:?}"));
        }
    }
    Ok(())
}

pub fn ap_equivalence(instances: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..instances {
        let n = rng.random_range(0..=20);
        let mut flags: Vec<Scored> = (0..n)
            .map(|_| Scored {
                score: rng.random_range(0.0..1.0),
                tp: rng.random_bool(0.5),
            })
            .collect();
        flags.sort_by(|a, b| b.score.total_cmp(&a.score));
        let tp = flags.iter().filter(|s| s.tp).count();
        let n_gt = tp + rng.random_range(0..=5);
        let got = average_precision(&flags, n_gt, ApMethod::AllPoint);
        let want = ap_oracle(&flags, n_gt);
        if got != want {
            return Err(format!("case {case}: ap {got} vs oracle {want}"));
        }
    }
    Ok(())
}

pub fn conv_equivalence(instances: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..instances {
        let k = if rng.random_bool(0.5) { 3 } else { 1 };
        let stride = rng.random_range(1..=2);
        let pad = rng.random_range(0..=1);
        let (n, ci, co) = (
            rng.random_range(1..=2),
            rng.random_range(1..=5),
            rng.random_range(1..=5),
        );
        let (h, w) = (rng.random_range(3..=9), rng.random_range(3..=9));
        let x = t(&[n, ci, h, w], randn(&mut rng, n * ci * h * w, 2.0));
        let wt = t(&[co, ci, k, k], randn(&mut rng, co * ci * k * k, 1.0));
        let b = t(&[co], randn(&mut rng, co, 1.0));
        let got = ops::conv2d(&x, &wt, &b, stride, pad).map_err(|e| format!("case {case}: {e}"))?;
        let want = conv2d_naive(&x, &wt, &b, stride, pad);
        if got != want {
            return Err(format!(
                "case {case}: conv k{k} s{stride} p{pad} {:?} differs from the naive loop",
                x.shape()
            ));
        }
    }
    Ok(())
}

pub fn mining_equivalence(instances: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..instances {
        let n = rng.random_range(0..=40);
        let mut ids: Vec<usize> = (0..200).collect();
        for i in 0..n {
            let j = rng.random_range(i..ids.len());
            ids.swap(i, j);
        }
        let negatives: Vec<(usize, f64)> = ids[..n]
            .iter()
            .map(|&a| (a, rng.random_range(0..10) as f64 * 0.25))
            .collect();
        let n_pos = rng.random_range(0..=5);
        let ratio = rng.random_range(1..=4);
        let got = select_hard_negatives(&negatives, n_pos, ratio);
        let want = mining_oracle(&negatives, n_pos, ratio);
        if got != want {
            return Err(format!("case {case}: mined {got:?} vs oracle {want:?}"));
        }
    }
    Ok(())
}

/// Greedy evaluation matching against a from-scratch restatement, and never
/// more true positives than the best possible one-to-one pairing.
pub fn eval_matching_equivalence(instances: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..instances {
        let nd = rng.random_range(0..=6);
        let ng = rng.random_range(0..=5);
        let gts: Vec<BBox> = (0..ng).map(|_| random_box(&mut rng)).collect();
        let dets: Vec<BBox> = (0..nd)
            .map(|_| {
                if ng > 0 && rng.random_bool(0.7) {
                    let g = gts[rng.random_range(0..ng)];
                    let j = |r: &mut ChaCha8Rng| r.random_range(-3.0..3.0);
                    BBox::new(
                        g.x1 + j(&mut rng),
                        g.y1 + j(&mut rng),
                        g.x2 + j(&mut rng),
                        g.y2 + j(&mut rng),
                    )
                } else {
                    random_box(&mut rng)
                }
            })
            .collect();
        let mut scored: Vec<(usize, BBox, f64)> = dets.iter().map(|&b| (0, b, rng.random_range(0.0..1.0))).collect();
        scored.sort_by(|a, b| b.2.total_cmp(&a.2));
        let thr = 0.5;
        let got = match_class(&scored, &gts.iter().map(|&g| (0, g)).collect::<Vec<_>>(), thr);
        let mut free: Vec<Option<BBox>> = gts.iter().map(|&g| Some(g)).collect();
        for (i, (_, d, _)) in scored.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (g, slot) in free.iter().enumerate() {
                if let Some(gb) = slot {
                    let v = iou_ref(d, gb);
                    if v >= thr && best.is_none_or(|(_, bv)| v > bv) {
                        best = Some((g, v));
                    }
                }
            }
            if let Some((g, _)) = best {
                free[g] = None;
            }
            if got[i].tp != best.is_some() {
                return Err(format!(
                    "case {case}: detection {i} tp {} vs oracle {}",
                    got[i].tp,
                    best.is_some()
                ));
            }
        }
        let tp = got.iter().filter(|s| s.tp).count();
        let bound = max_matching(&scored.iter().map(|s| s.1).collect::<Vec<_>>(), &gts, thr);
        if tp > bound {
            return Err(format!(
                "case {case}: {tp} true positives exceed the best pairing {bound}"
            ));
        }
    }
    Ok(())
}

pub fn iou_equivalence(instances: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corner = |r: &mut ChaCha8Rng| {
        let x1 = r.random_range(0..20);
        let y1 = r.random_range(0..20);
        [x1, y1, x1 + r.random_range(0..12), y1 + r.random_range(0..12)]
    };
    for case in 0..instances {
        let (a, b) = (corner(&mut rng), corner(&mut rng));
        let bb = |r: [i32; 4]| BBox::new(r[0] as f64, r[1] as f64, r[2] as f64, r[3] as f64);
        let got = iou(&bb(a), &bb(b));
        let want = iou_raster(a, b);
        if got != want {
            return Err(format!("case {case}: iou {a:?} {b:?} = {got}, raster {want}"));
        }
    }
    Ok(())
}

/// Focal loss with gamma 0 and unit weight is cross-entropy on a logit grid,
/// and the hand-derived value at p_t = 0.9, gamma 2, alpha 0.25.
pub fn focal_reductions() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for i in 0..=6000 {
        let x = -30.0 + i as f64 * 0.01;
        for fg in [true, false] {
            let d = (focal_term(x, fg, 0.0, 1.0) - bce(x, fg)).abs();
            worst = worst.max(d);
        }
    }
    if worst > 1e-12 {
        return Err(format!("gamma 0 differs from BCE by {worst:e}"));
    }
    // p_t = 0.9 for a positive: logit ln 9. alpha_t * (1 - p_t)^2 * -ln(p_t).
    let want = 0.25 * 0.01 * -(0.9f64.ln());
    let got = focal_loss(9f64.ln(), true, 2.0, 0.25).map_err(|e| e.to_string())?;
    if (got - 2.63401e-4).abs() > 1e-9 || (got - want).abs() > 1e-15 {
        return Err(format!("FL(p_t=0.9) = {got:.9e}, expected 2.63401e-4"));
    }
    Ok(format!(
        "max |FL_0 - BCE| = {worst:.1e} on 6001 grid points; FL(p_t=0.9) = {got:.6e}"
    ))
}

/// Bottom-90% loss shares of the synthetic population per gamma.
pub struct GammaSweep {
    pub gammas: Vec<f64>,
    pub background: Vec<f64>,
    pub foreground: Vec<f64>,
}

impl GammaSweep {
    pub fn compute(seed: u64) -> Self {
        let gammas = vec![0.0, 0.5, 1.0, 2.0];
        let samples = synthetic_logit_population(10_000, 100, seed);
        let curves = cdf_gamma_sweep(&samples, &gammas, 0.25).unwrap();
        let share = |p: Population| {
            curves
                .iter()
                .filter(|c| c.population == p)
                .map(|c| c.share_at(0.9))
                .collect()
        };
        GammaSweep {
            background: share(Population::Background),
            foreground: share(Population::Foreground),
            gammas,
        }
    }

    pub fn background_strictly_decreasing(&self) -> bool {
        self.background.windows(2).all(|w| w[1] < w[0])
    }

    pub fn delta_ratio(&self) -> f64 {
        let d = |v: &[f64]| (v[v.len() - 1] - v[0]).abs();
        d(&self.background) / d(&self.foreground)
    }
}
