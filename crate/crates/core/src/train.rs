//! One optimization step: forward, detection loss, backward, SGD update.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anchors::{generate_anchors, AnchorSet};
use crate::boxes::BBox;
use crate::cdf::LabeledLogit;
use crate::data::{augment_hflip, epoch_order, Sample};
use crate::error::{invalid, Error, Result};
use crate::graph::{Gradients, Graph, NodeId};
use crate::losses::{detection_loss, ClsMode, GtRef, LossConfig, LossReport};
use crate::matching::{match_anchors, AnchorLabel};
use crate::model::{forward, gather_heads, scatter_level, DetectorConfig, Forward, ParamNodes, Params};
use crate::optim::{sgd_step, SgdState, TrainConfig};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Training targets of one image.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Target {
    pub boxes: Vec<BBox>,
    pub classes: Vec<usize>,
}

/// Appends the batch-mean detection loss to `g` as a scalar node.
///
/// The returned report averages `total`, `cls` and `reg` over the batch, sums
/// `n_pos`, and leaves `per_anchor_cls_loss` empty.
pub fn batch_loss<T: Scalar>(
    g: &mut Graph<T>,
    fwd: &Forward,
    anchors: &AnchorSet,
    targets: &[Target],
    detector: &DetectorConfig,
    loss: &LossConfig,
    mode: ClsMode,
) -> Result<(LossReport, NodeId)> {
    let batch = targets.len();
    if batch == 0 {
        return Err(invalid("targets", "batch is empty"));
    }
    let k = detector.num_classes;
    let scale = 1.0 / batch as f64;
    let mut cls_grads: Vec<Tensor<T>> = fwd.cls.iter().map(|&id| Tensor::zeros(g.value(id).shape())).collect();
    let mut reg_grads: Vec<Tensor<T>> = fwd.reg.iter().map(|&id| Tensor::zeros(g.value(id).shape())).collect();
    let mut report = LossReport::default();
    for (n, t) in targets.iter().enumerate() {
        let (cls, reg) = gather_heads(g, fwd, anchors, n, k)?;
        let matches = match_anchors(anchors, &t.boxes, detector.matching)?;
        let out = detection_loss(
            &cls,
            &reg,
            k,
            &anchors.boxes,
            &matches,
            GtRef {
                boxes: &t.boxes,
                classes: &t.classes,
            },
            loss,
            mode,
        )?;
        report.total += out.report.total * scale;
        report.cls += out.report.cls * scale;
        report.reg += out.report.reg * scale;
        report.n_pos += out.report.n_pos;
        for (l, layout) in anchors.levels.iter().enumerate() {
            let (c0, c1) = (layout.offset * k, (layout.offset + layout.count()) * k);
            let scaled: Vec<f64> = out.cls_grad[c0..c1].iter().map(|v| v * scale).collect();
            scatter_level(&scaled, &mut cls_grads[l], n)?;
            let (r0, r1) = (layout.offset * 4, (layout.offset + layout.count()) * 4);
            let scaled: Vec<f64> = out.reg_grad[r0..r1].iter().map(|v| v * scale).collect();
            scatter_level(&scaled, &mut reg_grads[l], n)?;
        }
    }
    let inputs = fwd.cls.iter().chain(&fwd.reg).copied().collect();
    let grads = cls_grads.into_iter().chain(reg_grads).collect();
    let node = g.external_scalar(inputs, T::of(report.total), grads)?;
    Ok((report, node))
}

/// Loss report and parameter gradients for a batch of `N x 3 x H x W` images.
pub fn loss_and_grads<T: Scalar>(
    params: &Params<T>,
    images: &Tensor<T>,
    targets: &[Target],
    detector: &DetectorConfig,
    loss: &LossConfig,
    mode: ClsMode,
) -> Result<(LossReport, Gradients<T>)> {
    let [n, _, h, w] = images.dims4("train")?;
    if n != targets.len() {
        return Err(invalid("targets", "one target per image is required"));
    }
    let anchors = generate_anchors(h, w, &detector.pyramid)?;
    let mut g = Graph::new();
    let p = ParamNodes::register(&mut g, params);
    let x = g.input(images.clone());
    let fwd = forward(&mut g, &p, x, detector)?;
    let (report, node) = batch_loss(&mut g, &fwd, &anchors, targets, detector, loss, mode)?;
    let grads = g.backward(node)?;
    Ok((report, grads))
}

/// Parameters, optimizer state and settings of a training run.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub params: Params<T>,
    pub state: SgdState<T>,
    pub detector: DetectorConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub mode: ClsMode,
    pub step: usize,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(
        params: Params<T>,
        detector: DetectorConfig,
        train: TrainConfig,
        loss: LossConfig,
        mode: ClsMode,
    ) -> Result<Self> {
        train.validate()?;
        loss.validate()?;
        params.check(&detector)?;
        Ok(Trainer {
            params,
            state: SgdState::new(),
            detector,
            train,
            loss,
            mode,
            step: 0,
        })
    }

    pub fn step(&mut self, images: &Tensor<T>, targets: &[Target]) -> Result<LossReport> {
        let (report, grads) = loss_and_grads(&self.params, images, targets, &self.detector, &self.loss, self.mode)?;
        let lr = self.train.lr_at(self.step);
        sgd_step(
            &mut self.params.tensors,
            &grads.into_map(),
            &mut self.state,
            lr,
            &self.train,
        )?;
        self.step += 1;
        Ok(report)
    }
}

/// Training targets of a sample, optionally keeping `lost` objects.
pub fn sample_target(sample: &Sample, include_lost: bool) -> Target {
    let objects = sample.gt.targets(include_lost);
    let (boxes, classes) = objects.map(|o| (o.bbox, o.class_id)).unzip();
    Target { boxes, classes }
}

/// Stacks samples into an `N x 3 x H x W` batch.
pub fn make_batch<T: Scalar>(samples: &[&Sample], include_lost: bool) -> Result<(Tensor<T>, Vec<Target>)> {
    let images = samples
        .iter()
        .map(|s| {
            let [c, h, w] = [s.image.shape()[0], s.height(), s.width()];
            s.image.cast::<T>().reshape([1, c, h, w])
        })
        .collect::<Result<Vec<_>>>()?;
    let targets = samples.iter().map(|s| sample_target(s, include_lost)).collect();
    Ok((Tensor::stack(&images)?, targets))
}

/// Classification logits of the model on `samples`, labeled by anchor
/// matching: the true-class logit of each positive anchor is foreground, every
/// other logit of positive and negative anchors is background, and ignored
/// anchors are skipped.
pub fn labeled_logits<T: Scalar>(
    params: &Params<T>,
    samples: &[Sample],
    detector: &DetectorConfig,
    include_lost: bool,
) -> Result<Vec<LabeledLogit>> {
    let k = detector.num_classes;
    params.check(detector)?;
    let mut out = Vec::new();
    for s in samples {
        let [c, h, w] = [s.image.shape()[0], s.height(), s.width()];
        let image = s.image.cast::<T>().reshape([1, c, h, w])?;
        let anchors = generate_anchors(h, w, &detector.pyramid)?;
        let mut g = Graph::new();
        let p = ParamNodes::register(&mut g, params);
        let x = g.input(image);
        let fwd = forward(&mut g, &p, x, detector)?;
        let (cls, _) = gather_heads(&g, &fwd, &anchors, 0, k)?;
        let target = sample_target(s, include_lost);
        let matches = match_anchors(&anchors, &target.boxes, detector.matching)?;
        for (a, label) in matches.labels.iter().enumerate() {
            let true_class = match *label {
                AnchorLabel::Ignore => continue,
                AnchorLabel::Negative => None,
                AnchorLabel::Positive(gi) => Some(target.classes[gi]),
            };
            for (j, &logit) in cls[a * k..(a + 1) * k].iter().enumerate() {
                out.push(LabeledLogit {
                    logit,
                    is_foreground: true_class == Some(j),
                });
            }
        }
    }
    Ok(out)
}

/// Endless stream of sample indices: each epoch is a fresh seeded
/// permutation, consumed in order.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    n: usize,
    seed: u64,
    epoch: u64,
    order: Vec<usize>,
    pos: usize,
}

impl BatchSampler {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("training set"));
        }
        Ok(BatchSampler {
            n,
            seed,
            epoch: 0,
            order: epoch_order(n, seed, 0),
            pos: 0,
        })
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.n {
                self.epoch += 1;
                self.order = epoch_order(self.n, self.seed, self.epoch);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Options of [`fit`] beyond the trainer's own configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Probability of a horizontal flip per drawn sample.
    pub hflip: f64,
    pub include_lost: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            hflip: 0.5,
            include_lost: false,
        }
    }
}

/// Runs the remaining `trainer.train.steps` steps over `samples`, calling
/// `on_step(trainer, report)` after each one; a callback error stops the run.
/// Fully determined by `trainer.train.seed` and the completed step count.
pub fn fit<T, F, E>(
    trainer: &mut Trainer<T>,
    samples: &[Sample],
    opts: FitOptions,
    mut on_step: F,
) -> core::result::Result<(), E>
where
    T: Scalar,
    F: FnMut(&Trainer<T>, &LossReport) -> core::result::Result<(), E>,
    E: From<Error>,
{
    let seed = trainer.train.seed;
    let mut sampler = BatchSampler::new(samples.len(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    // Replay the draws of completed steps so a resumed run continues the
    // same stream.
    for _ in 0..trainer.step {
        for _ in sampler.next_batch(trainer.train.batch_size) {
            let _: f64 = rng.random();
        }
    }
    while trainer.step < trainer.train.steps {
        let idx = sampler.next_batch(trainer.train.batch_size);
        let drawn = idx
            .iter()
            .map(|&i| augment_hflip(&samples[i], opts.hflip, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Sample> = drawn.iter().collect();
        let (images, targets) = make_batch::<T>(&refs, opts.include_lost)?;
        let report = trainer.step(&images, &targets)?;
        on_step(trainer, &report)?;
    }
    Ok(())
}
