//! TinyNet backbone, top-down feature pyramid and shared dense heads.
//!
//! ```text
//! image ─ stem(3x3/2,16) ─ s1(3x3/2,16 ; 3x3,16) ─ s2(…,32) ─ s3(…,64)
//!                            │ C1 (/4)               │ C2 (/8)   │ C3 (/16)
//!                          lat1                    lat2        lat3
//!                            P1 = lat1 + up(P2)      P2 = lat2 + up(P3)
//!                          smooth1                 smooth2     smooth3
//! ```
//!
//! Each pyramid level feeds the same classification and regression subnets
//! (one 3x3 conv + ReLU, then a 3x3 prediction conv). No normalization layers.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

// Unused when std is linked into the build, whose inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anchors::{generate_anchors, AnchorSet, LevelLayout, PyramidConfig};
use crate::boxes::{decode, BBox};
use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, NodeId};
use crate::matching::MatchConfig;
use crate::nms::nms;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Prior probability of foreground used to initialize the classifier bias.
pub const PRIOR_PROBABILITY: f64 = 0.01;

/// Largest box log-scale delta accepted on the prediction path (`ln(1000/16)`).
pub const MAX_LOG_SCALE: f64 = 4.135_166_556_742_356;

const BACKBONE: [(&str, usize, usize, usize); 7] = [
    // name, in, out, stride
    ("stem", 3, 16, 2),
    ("s1a", 16, 16, 2),
    ("s1b", 16, 16, 1),
    ("s2a", 16, 32, 2),
    ("s2b", 32, 32, 1),
    ("s3a", 32, 64, 2),
    ("s3b", 64, 64, 1),
];

/// Backbone channels of C1, C2, C3.
const STAGE_CHANNELS: [usize; 3] = [16, 32, 64];
const STAGE_STRIDES: [usize; 3] = [4, 8, 16];

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub pyramid: PyramidConfig,
    pub num_classes: usize,
    pub matching: MatchConfig,
    pub score_thr: f64,
    pub nms_iou: f64,
    pub max_detections: usize,
    pub topk_per_level: usize,
}

impl DetectorConfig {
    pub fn new(num_classes: usize) -> Self {
        DetectorConfig {
            pyramid: PyramidConfig::default(),
            num_classes,
            matching: MatchConfig::default(),
            score_thr: 0.05,
            nms_iou: 0.5,
            max_detections: 100,
            topk_per_level: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pyramid.validate()?;
        if self.pyramid.strides != STAGE_STRIDES {
            return Err(invalid("strides", "TinyNet provides levels at strides 4, 8, 16"));
        }
        if self.num_classes == 0 {
            return Err(invalid("num_classes", "must be positive"));
        }
        Ok(())
    }
}

/// Named model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub tensors: BTreeMap<String, Tensor<T>>,
}

/// One parameter's shape and initialization.
struct Spec {
    name: String,
    shape: Vec<usize>,
    /// Uniform bound multiplier on `sqrt(3 / fan_in)`; zero for biases.
    gain: f64,
    fill: f64,
}

fn conv_specs(name: &str, cin: usize, cout: usize, k: usize, gain: f64, bias: f64) -> [Spec; 2] {
    [
        Spec {
            name: format!("{name}.weight"),
            shape: vec![cout, cin, k, k],
            gain,
            fill: 0.0,
        },
        Spec {
            name: format!("{name}.bias"),
            shape: vec![cout],
            gain: 0.0,
            fill: bias,
        },
    ]
}

fn param_specs(cfg: &DetectorConfig) -> Vec<Spec> {
    let f = cfg.pyramid.feature_channels;
    let a = cfg.pyramid.anchors_per_cell();
    let relu_gain = 2f64.sqrt();
    let prior_bias = -((1.0 - PRIOR_PROBABILITY) / PRIOR_PROBABILITY).ln();
    let mut specs = Vec::new();
    for (name, cin, cout, _) in BACKBONE {
        specs.extend(conv_specs(name, cin, cout, 3, relu_gain, 0.0));
    }
    for (i, &c) in STAGE_CHANNELS.iter().enumerate() {
        specs.extend(conv_specs(&format!("lat{}", i + 1), c, f, 1, 1.0, 0.0));
        specs.extend(conv_specs(&format!("smooth{}", i + 1), f, f, 3, 1.0, 0.0));
    }
    specs.extend(conv_specs("cls_conv", f, f, 3, relu_gain, 0.0));
    specs.extend(conv_specs("cls_out", f, a * cfg.num_classes, 3, 0.1, prior_bias));
    specs.extend(conv_specs("reg_conv", f, f, 3, relu_gain, 0.0));
    specs.extend(conv_specs("reg_out", f, a * 4, 3, 0.1, 0.0));
    specs
}

impl<T: Scalar> Params<T> {
    /// Fan-in scaled uniform weights, zero biases, prior-probability bias on
    /// the classifier output.
    pub fn init(cfg: &DetectorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for spec in param_specs(cfg) {
            let n: usize = spec.shape.iter().product();
            let data = if spec.gain > 0.0 {
                let fan_in: usize = spec.shape[1..].iter().product();
                let bound = spec.gain * (3.0 / fan_in as f64).sqrt();
                (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect()
            } else {
                vec![T::of(spec.fill); n]
            };
            tensors.insert(spec.name, Tensor::new(spec.shape, data)?);
        }
        Ok(Params { tensors })
    }

    /// Checks that every expected parameter is present with the right shape.
    pub fn check(&self, cfg: &DetectorConfig) -> Result<()> {
        cfg.validate()?;
        for spec in param_specs(cfg) {
            let t = self
                .tensors
                .get(&spec.name)
                .ok_or_else(|| Error::MissingParam(spec.name.clone()))?;
            if t.shape() != spec.shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    op: "params",
                    expected: spec.shape,
                    got: t.shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    /// Class count implied by the classifier output width.
    pub fn num_classes(&self, pyramid: &PyramidConfig) -> Result<usize> {
        let t = self
            .tensors
            .get("cls_out.bias")
            .ok_or_else(|| Error::MissingParam("cls_out.bias".to_string()))?;
        let a = pyramid.anchors_per_cell();
        if t.len() % a != 0 {
            return Err(invalid("cls_out", "width is not a multiple of anchors per cell"));
        }
        Ok(t.len() / a)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        Params {
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }

    pub fn num_values(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }
}

/// Parameters registered as trainable graph leaves.
pub struct ParamNodes(BTreeMap<String, NodeId>);

impl ParamNodes {
    pub fn register<T: Scalar>(graph: &mut Graph<T>, params: &Params<T>) -> Self {
        ParamNodes(
            params
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), graph.param(k.clone(), v.clone())))
                .collect(),
        )
    }

    fn conv<T: Scalar>(&self, g: &mut Graph<T>, name: &str, x: NodeId, stride: usize) -> Result<NodeId> {
        let w = *self
            .0
            .get(&format!("{name}.weight"))
            .ok_or_else(|| Error::MissingParam(format!("{name}.weight")))?;
        let b = *self
            .0
            .get(&format!("{name}.bias"))
            .ok_or_else(|| Error::MissingParam(format!("{name}.bias")))?;
        let padding = g.value(w).shape()[2] / 2;
        g.conv2d(x, w, b, stride, padding)
    }
}

/// Graph nodes of one forward pass.
pub struct Forward {
    pub features: Vec<NodeId>,
    pub cls: Vec<NodeId>,
    pub reg: Vec<NodeId>,
}

/// Backbone plus pyramid; returns one feature node per level, finest first.
pub fn pyramid_nodes<T: Scalar>(
    g: &mut Graph<T>,
    p: &ParamNodes,
    image: NodeId,
    cfg: &DetectorConfig,
) -> Result<Vec<NodeId>> {
    let [_, c, h, w] = g.value(image).dims4("build_pyramid")?;
    if c != 3 {
        return Err(Error::ShapeMismatch {
            op: "build_pyramid",
            expected: vec![3],
            got: vec![c],
        });
    }
    cfg.pyramid.check_image(h, w)?;
    let mut x = image;
    let mut stages = Vec::with_capacity(3);
    for (name, _, _, stride) in BACKBONE {
        x = p.conv(g, name, x, stride)?;
        x = g.relu(x);
        if name.ends_with('b') {
            stages.push(x);
        }
    }
    let mut merged: Vec<NodeId> = vec![x; 3];
    let mut top: Option<NodeId> = None;
    for i in (0..3).rev() {
        let lateral = p.conv(g, &format!("lat{}", i + 1), stages[i], 1)?;
        let m = match top {
            Some(t) => {
                let up = g.upsample2x(t)?;
                g.add(lateral, up)?
            }
            None => lateral,
        };
        merged[i] = m;
        top = Some(m);
    }
    merged
        .into_iter()
        .enumerate()
        .map(|(i, m)| p.conv(g, &format!("smooth{}", i + 1), m, 1))
        .collect()
}

pub fn forward<T: Scalar>(g: &mut Graph<T>, p: &ParamNodes, image: NodeId, cfg: &DetectorConfig) -> Result<Forward> {
    let features = pyramid_nodes(g, p, image, cfg)?;
    let mut cls = Vec::with_capacity(features.len());
    let mut reg = Vec::with_capacity(features.len());
    for &f in &features {
        let c = p.conv(g, "cls_conv", f, 1)?;
        let c = g.relu(c);
        cls.push(p.conv(g, "cls_out", c, 1)?);
        let r = p.conv(g, "reg_conv", f, 1)?;
        let r = g.relu(r);
        reg.push(p.conv(g, "reg_out", r, 1)?);
    }
    Ok(Forward { features, cls, reg })
}

/// Feature maps of every pyramid level for a batch of normalized images.
pub fn build_pyramid<T: Scalar>(image: &Tensor<T>, params: &Params<T>, cfg: &DetectorConfig) -> Result<Vec<Tensor<T>>> {
    let mut g = Graph::new();
    let p = ParamNodes::register(&mut g, params);
    let x = g.input(image.clone());
    let levels = pyramid_nodes(&mut g, &p, x, cfg)?;
    Ok(levels.into_iter().map(|id| g.value(id).clone()).collect())
}

/// Copies sample `n` of a level's head output into canonical anchor order:
/// cell row, cell column, anchor, then the `per_anchor` channel values.
pub fn gather_level<T: Scalar>(
    head: &Tensor<T>,
    n: usize,
    layout: &LevelLayout,
    per_anchor: usize,
    out: &mut Vec<f64>,
) -> Result<()> {
    let [_, c, h, w] = head.dims4("gather_level")?;
    if c != layout.anchors_per_cell * per_anchor || h != layout.grid_h || w != layout.grid_w {
        return Err(Error::ShapeMismatch {
            op: "gather_level",
            expected: vec![layout.anchors_per_cell * per_anchor, layout.grid_h, layout.grid_w],
            got: vec![c, h, w],
        });
    }
    let plane = h * w;
    let base = &head.data()[n * c * plane..(n + 1) * c * plane];
    for cell in 0..plane {
        for ch in 0..c {
            out.push(base[ch * plane + cell].as_f64());
        }
    }
    Ok(())
}

/// Inverse of [`gather_level`]: writes canonical-order values for sample `n`
/// into a head-shaped tensor.
pub fn scatter_level<T: Scalar>(values: &[f64], head: &mut Tensor<T>, n: usize) -> Result<()> {
    let [_, c, h, w] = head.dims4("scatter_level")?;
    let plane = h * w;
    if values.len() != c * plane {
        return Err(Error::ShapeMismatch {
            op: "scatter_level",
            expected: vec![c * plane],
            got: vec![values.len()],
        });
    }
    let base = &mut head.data_mut()[n * c * plane..(n + 1) * c * plane];
    for cell in 0..plane {
        for ch in 0..c {
            base[ch * plane + cell] = T::of(values[cell * c + ch]);
        }
    }
    Ok(())
}

/// Flattened head outputs of sample `n` across all levels.
pub fn gather_heads<T: Scalar>(
    g: &Graph<T>,
    fwd: &Forward,
    anchors: &AnchorSet,
    n: usize,
    num_classes: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut cls = Vec::with_capacity(anchors.len() * num_classes);
    let mut reg = Vec::with_capacity(anchors.len() * 4);
    for (l, layout) in anchors.levels.iter().enumerate() {
        gather_level(g.value(fwd.cls[l]), n, layout, num_classes, &mut cls)?;
        gather_level(g.value(fwd.reg[l]), n, layout, 4, &mut reg)?;
    }
    Ok((cls, reg))
}

/// Final detection: clipped box, class and sigmoid score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub class_id: usize,
    pub score: f64,
}

struct Candidate {
    bbox: BBox,
    class_id: usize,
    score: f64,
}

/// Per-level head outputs of one image in canonical anchor order: sigmoid
/// scores (`anchors x K`) and raw box deltas (`anchors x 4`).
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutputs {
    pub anchors: AnchorSet,
    pub scores: Vec<Vec<f64>>,
    pub deltas: Vec<Vec<f64>>,
}

/// Backbone, pyramid and heads on one normalized `1x3xHxW` image.
pub fn infer_heads<T: Scalar>(params: &Params<T>, image: &Tensor<T>, cfg: &DetectorConfig) -> Result<HeadOutputs> {
    let [n, _, h, w] = image.dims4("predict")?;
    if n != 1 {
        return Err(invalid("image", "predict takes a single image"));
    }
    params.check(cfg)?;
    let anchors = generate_anchors(h, w, &cfg.pyramid)?;
    let mut g = Graph::new();
    let p = ParamNodes::register(&mut g, params);
    let x = g.input(image.clone());
    let fwd = forward(&mut g, &p, x, cfg)?;
    let k = cfg.num_classes;
    let mut scores = Vec::with_capacity(anchors.levels.len());
    let mut deltas = Vec::with_capacity(anchors.levels.len());
    for (l, layout) in anchors.levels.iter().enumerate() {
        let probs = g.sigmoid(fwd.cls[l]);
        let mut s = Vec::with_capacity(layout.count() * k);
        gather_level(g.value(probs), 0, layout, k, &mut s)?;
        let mut d = Vec::with_capacity(layout.count() * 4);
        gather_level(g.value(fwd.reg[l]), 0, layout, 4, &mut d)?;
        scores.push(s);
        deltas.push(d);
    }
    Ok(HeadOutputs {
        anchors,
        scores,
        deltas,
    })
}

/// Thresholding, per-level top-k, decoding, clipping, per-class NMS and the
/// global cap.
pub fn postprocess(heads: &HeadOutputs, cfg: &DetectorConfig) -> Vec<Detection> {
    let k = cfg.num_classes;
    let (h, w) = (heads.anchors.image_h as f64, heads.anchors.image_w as f64);
    let mut candidates: Vec<Candidate> = Vec::new();
    for (l, layout) in heads.anchors.levels.iter().enumerate() {
        let (scores, deltas) = (&heads.scores[l], &heads.deltas[l]);
        let mut keep: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > cfg.score_thr).collect();
        keep.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        keep.truncate(cfg.topk_per_level);
        for i in keep {
            let (a, class_id) = (i / k, i % k);
            let d = &deltas[a * 4..a * 4 + 4];
            let delta = [d[0], d[1], d[2].min(MAX_LOG_SCALE), d[3].min(MAX_LOG_SCALE)];
            let bbox = decode(&heads.anchors.boxes[layout.offset + a], delta).clip(w, h);
            candidates.push(Candidate {
                bbox,
                class_id,
                score: scores[i],
            });
        }
    }

    let mut kept: Vec<usize> = Vec::new();
    for class_id in 0..k {
        let idx: Vec<usize> = (0..candidates.len())
            .filter(|&i| candidates[i].class_id == class_id)
            .collect();
        let boxes: Vec<BBox> = idx.iter().map(|&i| candidates[i].bbox).collect();
        let scores: Vec<f64> = idx.iter().map(|&i| candidates[i].score).collect();
        kept.extend(
            nms(&boxes, &scores, cfg.nms_iou, cfg.max_detections)
                .into_iter()
                .map(|j| idx[j]),
        );
    }
    kept.sort_by(|&a, &b| candidates[b].score.total_cmp(&candidates[a].score).then(a.cmp(&b)));
    kept.truncate(cfg.max_detections);
    kept.into_iter()
        .map(|i| {
            let c = &candidates[i];
            Detection {
                bbox: c.bbox,
                class_id: c.class_id,
                score: c.score.clamp(0.0, 1.0),
            }
        })
        .collect()
}

/// Runs the detector on one normalized `1x3xHxW` image.
///
/// Per level: scores above `score_thr`, best `topk_per_level`, decoded and
/// clipped. Then per-class NMS over all levels and a global cap.
pub fn predict<T: Scalar>(params: &Params<T>, image: &Tensor<T>, cfg: &DetectorConfig) -> Result<Vec<Detection>> {
    Ok(postprocess(&infer_heads(params, image, cfg)?, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(seed: u64, h: usize, w: usize) -> Tensor<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..3 * h * w).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        Tensor::new([1, 3, h, w], data).unwrap()
    }

    #[test]
    fn pyramid_shapes() {
        let cfg = DetectorConfig::new(3);
        let params = Params::<f32>::init(&cfg, 1).unwrap();
        let levels = build_pyramid(&random_image(0, 64, 64), &params, &cfg).unwrap();
        let shapes: Vec<&[usize]> = levels.iter().map(|t| t.shape()).collect();
        assert_eq!(
            shapes,
            vec![&[1, 32, 16, 16][..], &[1, 32, 8, 8][..], &[1, 32, 4, 4][..]]
        );
    }

    #[test]
    fn zero_weights_give_zero_features() {
        let cfg = DetectorConfig::new(3);
        let mut params = Params::<f32>::init(&cfg, 1).unwrap();
        for t in params.tensors.values_mut() {
            t.data_mut().fill(0.0);
        }
        let levels = build_pyramid(&random_image(0, 32, 32), &params, &cfg).unwrap();
        assert!(levels.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn indivisible_image_is_rejected() {
        let cfg = DetectorConfig::new(3);
        let params = Params::<f32>::init(&cfg, 1).unwrap();
        assert!(matches!(
            build_pyramid(&random_image(0, 40, 64), &params, &cfg),
            Err(Error::IndivisibleImage { .. })
        ));
    }

    #[test]
    fn fresh_model_detects_nothing() {
        let cfg = DetectorConfig::new(3);
        let params = Params::<f32>::init(&cfg, 5).unwrap();
        for seed in 0..3 {
            let dets = predict(&params, &random_image(seed, 64, 64), &cfg).unwrap();
            assert!(dets.is_empty(), "{dets:?}");
        }
    }

    #[test]
    fn threshold_one_is_empty() {
        let cfg = DetectorConfig {
            score_thr: 1.0,
            ..DetectorConfig::new(3)
        };
        let mut params = Params::<f32>::init(&cfg, 5).unwrap();
        params.tensors.get_mut("cls_out.bias").unwrap().data_mut().fill(50.0);
        assert!(predict(&params, &random_image(1, 32, 32), &cfg).unwrap().is_empty());
    }

    #[test]
    fn confident_model_respects_contract() {
        let cfg = DetectorConfig::new(3);
        let mut params = Params::<f32>::init(&cfg, 5).unwrap();
        params.tensors.get_mut("cls_out.bias").unwrap().data_mut().fill(3.0);
        let img = random_image(2, 64, 64);
        let dets = predict(&params, &img, &cfg).unwrap();
        assert!(!dets.is_empty() && dets.len() <= 100);
        for d in &dets {
            assert!(d.bbox.x1 >= 0.0 && d.bbox.y1 >= 0.0 && d.bbox.x2 <= 64.0 && d.bbox.y2 <= 64.0);
            assert!((0.0..=1.0).contains(&d.score) && d.class_id < 3);
        }
        assert!(dets.windows(2).all(|p| p[0].score >= p[1].score));
        assert_eq!(dets, predict(&params, &img, &cfg).unwrap());
    }

    #[test]
    fn gather_scatter_inverse() {
        let layout = LevelLayout {
            stride: 4,
            grid_h: 2,
            grid_w: 3,
            anchors_per_cell: 2,
            offset: 0,
        };
        let data: Vec<f64> = (0..2 * 8 * 6).map(|v| v as f64).collect();
        let t = Tensor::<f64>::new([2, 8, 2, 3], data).unwrap();
        let mut flat = Vec::new();
        gather_level(&t, 1, &layout, 4, &mut flat).unwrap();
        // Cell (0,0), anchor 1, value 0 lives in channel 4 of sample 1.
        assert_eq!(flat[4], t.data()[48 + 4 * 6]);
        let mut back = Tensor::<f64>::zeros([2, 8, 2, 3]);
        scatter_level(&flat, &mut back, 1).unwrap();
        assert_eq!(&back.data()[48..], &t.data()[48..]);
    }

    #[test]
    fn params_shape_check() {
        let cfg = DetectorConfig::new(3);
        let params = Params::<f32>::init(&cfg, 0).unwrap();
        params.check(&cfg).unwrap();
        assert_eq!(params.num_classes(&cfg.pyramid).unwrap(), 3);
        assert!(params.check(&DetectorConfig::new(6)).is_err());
    }
}
