//! Ground truth records, image normalization, flip augmentation and the
//! synthetic-shapes corpus.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

// Unused when std is linked into the build, whose inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boxes::{iou, BBox};
use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

/// Dataset labels in class-id order.
pub const SDD_LABELS: [&str; 6] = ["Pedestrian", "Biker", "Skater", "Car", "Bus", "Cart"];
pub const SYNTH_LABELS: [&str; 3] = ["Disk", "Square", "Triangle"];

/// Ordered label names; a label's position is its class id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    names: Vec<String>,
}

impl LabelMap {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        if names.is_empty() {
            return Err(invalid("labels", "at least one label is required"));
        }
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.contains('"') || n.chars().any(char::is_whitespace) {
                return Err(invalid("labels", alloc::format!("bad label {n:?}")));
            }
            if names[..i].contains(n) {
                return Err(invalid("labels", alloc::format!("duplicate label {n:?}")));
            }
        }
        Ok(LabelMap { names })
    }

    pub fn sdd() -> Self {
        LabelMap::new(&SDD_LABELS).expect("static labels")
    }

    pub fn synthetic() -> Self {
        LabelMap::new(&SYNTH_LABELS).expect("static labels")
    }

    pub fn id_of(&self, label: &str) -> Option<usize> {
        self.names.iter().position(|n| n == label)
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtObject {
    pub bbox: BBox,
    pub class_id: usize,
    pub track_id: i64,
    pub lost: bool,
    pub occluded: bool,
    pub generated: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthFrame {
    pub frame_index: u64,
    pub objects: Vec<GtObject>,
}

impl GroundTruthFrame {
    /// Objects used as targets; `lost` ones are dropped unless requested.
    pub fn targets(&self, include_lost: bool) -> impl Iterator<Item = &GtObject> {
        self.objects.iter().filter(move |o| include_lost || !o.lost)
    }
}

/// A normalized `3 x H x W` image with its annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Tensor<f32>,
    pub gt: GroundTruthFrame,
    pub source: String,
}

impl Sample {
    pub fn height(&self) -> usize {
        self.image.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.image.shape()[2]
    }

    /// Finite pixels and every box inside the image.
    pub fn check(&self) -> Result<()> {
        if self.image.rank() != 3 || self.image.shape()[0] != 3 {
            return Err(Error::InvalidShape {
                shape: self.image.shape().to_vec(),
                reason: "sample image must be 3 x H x W".into(),
            });
        }
        if !self.image.all_finite() {
            return Err(Error::NonFinite("sample image"));
        }
        let (w, h) = (self.width() as f64, self.height() as f64);
        for o in &self.gt.objects {
            let b = o.bbox;
            if !(b.is_valid() && b.x1 >= 0.0 && b.y1 >= 0.0 && b.x2 <= w && b.y2 <= h) {
                return Err(invalid("gt", alloc::format!("box {b:?} outside {w}x{h}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            mean: [127.5; 3],
            std: [127.5; 3],
        }
    }
}

fn check_chw(image: &Tensor<f32>) -> Result<(usize, usize)> {
    match *image.shape() {
        [3, h, w] => Ok((h, w)),
        _ => Err(Error::InvalidShape {
            shape: image.shape().to_vec(),
            reason: "expected a 3 x H x W image".into(),
        }),
    }
}

/// `(x - mean) / std` per channel.
pub fn normalize_image(image: &Tensor<f32>, norm: &Normalization) -> Result<Tensor<f32>> {
    let (h, w) = check_chw(image)?;
    if norm.std.iter().any(|&s| !(s > 0.0)) {
        return Err(invalid("std", "must be positive for every channel"));
    }
    let mut out = image.clone();
    for (c, plane) in out.data_mut().chunks_exact_mut(h * w).enumerate() {
        for v in plane {
            *v = (*v - norm.mean[c]) / norm.std[c];
        }
    }
    Ok(out)
}

/// Inverse of [`normalize_image`], clamped to `[0, 255]`.
pub fn denormalize_image(image: &Tensor<f32>, norm: &Normalization) -> Result<Tensor<f32>> {
    let (h, w) = check_chw(image)?;
    let mut out = image.clone();
    for (c, plane) in out.data_mut().chunks_exact_mut(h * w).enumerate() {
        for v in plane {
            *v = (*v * norm.std[c] + norm.mean[c]).clamp(0.0, 255.0);
        }
    }
    Ok(out)
}

/// Reverses image columns and mirrors every box.
pub fn hflip(sample: &Sample) -> Sample {
    let (h, w) = (sample.height(), sample.width());
    let mut image = sample.image.clone();
    for row in image.data_mut().chunks_exact_mut(w) {
        row.reverse();
    }
    debug_assert_eq!(image.len(), 3 * h * w);
    let mut gt = sample.gt.clone();
    for o in &mut gt.objects {
        o.bbox = o.bbox.hflip(w as f64);
    }
    Sample {
        image,
        gt,
        source: sample.source.clone(),
    }
}

/// Flips with probability `p`; always consumes exactly one random draw.
pub fn augment_hflip<R: Rng + ?Sized>(sample: &Sample, p: f64, rng: &mut R) -> Result<Sample> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", "must lie in [0, 1]"));
    }
    let u: f64 = rng.random();
    Ok(if u < p { hflip(sample) } else { sample.clone() })
}

/// Crops the centered largest region whose sides are multiples of `multiple`.
/// Boxes are shifted and clipped; boxes left without area are dropped.
pub fn center_crop_to_multiple(sample: &Sample, multiple: usize) -> Result<Sample> {
    let (h, w) = (sample.height(), sample.width());
    let (nh, nw) = (h / multiple * multiple, w / multiple * multiple);
    if nh == 0 || nw == 0 {
        return Err(Error::IndivisibleImage { h, w, stride: multiple });
    }
    let (oy, ox) = ((h - nh) / 2, (w - nw) / 2);
    let mut data = Vec::with_capacity(3 * nh * nw);
    for c in 0..3 {
        for y in 0..nh {
            let start = c * h * w + (y + oy) * w + ox;
            data.extend_from_slice(&sample.image.data()[start..start + nw]);
        }
    }
    let mut gt = sample.gt.clone();
    gt.objects = gt
        .objects
        .into_iter()
        .filter_map(|mut o| {
            let b = BBox::new(
                o.bbox.x1 - ox as f64,
                o.bbox.y1 - oy as f64,
                o.bbox.x2 - ox as f64,
                o.bbox.y2 - oy as f64,
            )
            .clip(nw as f64, nh as f64);
            o.bbox = b;
            (b.area() > 0.0).then_some(o)
        })
        .collect();
    Ok(Sample {
        image: Tensor::new([3, nh, nw], data)?,
        gt,
        source: sample.source.clone(),
    })
}

/// Seeded permutation of `0..n` for one epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Disk,
    Square,
    Triangle,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Disk, Shape::Square, Shape::Triangle];

    pub fn class_id(self) -> usize {
        self as usize
    }

    /// Whether pixel `(x, y)` of an `s x s` cell anchored at the origin is
    /// covered, testing the pixel center.
    fn covers(self, x: usize, y: usize, s: usize) -> bool {
        let (px, py, s) = (x as f64 + 0.5, y as f64 + 0.5, s as f64);
        match self {
            Shape::Square => true,
            Shape::Disk => {
                let r = 0.5 * s;
                (px - r).powi(2) + (py - r).powi(2) <= r * r
            }
            Shape::Triangle => (px - 0.5 * s).abs() <= 0.5 * py,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub image_size: usize,
    pub num_images: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub min_size: usize,
    pub max_size: usize,
    /// Background pixels are uniform in `[0, 255 * noise]`; object pixels get
    /// `±127.5 * noise` jitter.
    pub noise: f64,
    pub max_overlap: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            image_size: 64,
            num_images: 500,
            min_objects: 1,
            max_objects: 4,
            min_size: 12,
            max_size: 32,
            noise: 0.3,
            max_overlap: 0.3,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || !self.image_size.is_multiple_of(16) {
            return Err(invalid("image_size", "must be a positive multiple of 16"));
        }
        if self.min_objects > self.max_objects {
            return Err(invalid("objects", "min_objects exceeds max_objects"));
        }
        if self.min_size == 0 || self.min_size > self.max_size || self.max_size > self.image_size {
            return Err(invalid("size", "need 0 < min_size <= max_size <= image_size"));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(invalid("noise", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// One synthetic frame: raw `3 x H x W` pixels in `[0, 255]` and its objects.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub image: Tensor<f32>,
    pub frame: GroundTruthFrame,
}

pub const PLACEMENT_ATTEMPTS: usize = 100;

/// Renders `cfg.num_images` frames of disks, squares and triangles over
/// uniform noise. Each recorded box is the tight bound of the drawn pixels.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<SynthImage>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.image_size;
    let plane = n * n;
    let bg_max = 255.0 * cfg.noise;
    let jitter = 127.5 * cfg.noise;
    let mut out = Vec::with_capacity(cfg.num_images);
    for index in 0..cfg.num_images {
        let mut pixels: Vec<f32> = (0..3 * plane)
            .map(|_| (rng.random::<f64>() * bg_max).round() as f32)
            .collect();
        let count = rng.random_range(cfg.min_objects..=cfg.max_objects);
        let mut objects: Vec<GtObject> = Vec::with_capacity(count);
        for object in 0..count {
            let mut placed = None;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let shape = Shape::ALL[rng.random_range(0..3)];
                let s = rng.random_range(cfg.min_size..=cfg.max_size);
                let x0 = rng.random_range(0..=n - s);
                let y0 = rng.random_range(0..=n - s);
                let (mut bx1, mut by1, mut bx2, mut by2) = (usize::MAX, usize::MAX, 0, 0);
                for y in 0..s {
                    for x in 0..s {
                        if shape.covers(x, y, s) {
                            bx1 = bx1.min(x0 + x);
                            by1 = by1.min(y0 + y);
                            bx2 = bx2.max(x0 + x + 1);
                            by2 = by2.max(y0 + y + 1);
                        }
                    }
                }
                let bbox = BBox::new(bx1 as f64, by1 as f64, bx2 as f64, by2 as f64);
                if objects.iter().all(|o| iou(&o.bbox, &bbox) <= cfg.max_overlap) {
                    placed = Some((shape, s, x0, y0, bbox));
                    break;
                }
            }
            let (shape, s, x0, y0, bbox) = placed.ok_or(Error::Placement {
                image: index,
                object,
                attempts: PLACEMENT_ATTEMPTS,
            })?;
            let color: [f64; 3] = [
                rng.random_range(128.0..=255.0),
                rng.random_range(128.0..=255.0),
                rng.random_range(128.0..=255.0),
            ];
            for y in 0..s {
                for x in 0..s {
                    if !shape.covers(x, y, s) {
                        continue;
                    }
                    let at = (y0 + y) * n + x0 + x;
                    for (c, &base) in color.iter().enumerate() {
                        let v = base + (rng.random::<f64>() - 0.5) * 2.0 * jitter;
                        pixels[c * plane + at] = v.clamp(0.0, 255.0).round() as f32;
                    }
                }
            }
            objects.push(GtObject {
                bbox,
                class_id: shape.class_id(),
                track_id: object as i64,
                lost: false,
                occluded: false,
                generated: false,
            });
        }
        out.push(SynthImage {
            image: Tensor::new([3, n, n], pixels)?,
            frame: GroundTruthFrame {
                frame_index: index as u64,
                objects,
            },
        });
    }
    Ok(out)
}
