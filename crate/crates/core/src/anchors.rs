//! Dense anchor tiling over the pyramid levels.
//!
//! Canonical order: level, then cell row, then cell column, then the anchor
//! index `scale_index * ratios.len() + ratio_index`. The heads emit channels in
//! the same anchor order, so index `i` of the flat anchor list and of the
//! flattened head outputs refer to the same prior box.

use alloc::vec;
use alloc::vec::Vec;

// Unused when std is linked into the build, whose inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::boxes::BBox;
use crate::error::{invalid, Error, Result};

/// Pyramid geometry and anchor shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidConfig {
    pub strides: Vec<usize>,
    pub base_sizes: Vec<f64>,
    pub scales: Vec<f64>,
    /// Height over width.
    pub ratios: Vec<f64>,
    pub feature_channels: usize,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        PyramidConfig {
            strides: vec![4, 8, 16],
            base_sizes: vec![16.0, 32.0, 64.0],
            scales: vec![1.0, 2f64.powf(1.0 / 3.0), 2f64.powf(2.0 / 3.0)],
            ratios: vec![0.5, 1.0, 2.0],
            feature_channels: 32,
        }
    }
}

impl PyramidConfig {
    pub fn anchors_per_cell(&self) -> usize {
        self.scales.len() * self.ratios.len()
    }

    pub fn max_stride(&self) -> usize {
        self.strides.iter().copied().max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strides.is_empty() || self.strides.len() != self.base_sizes.len() {
            return Err(invalid("strides", "one base size per stride is required"));
        }
        if self.strides.contains(&0) {
            return Err(invalid("strides", "must be positive"));
        }
        if self.scales.is_empty() || self.ratios.is_empty() {
            return Err(invalid("scales", "scales and ratios must be non-empty"));
        }
        if self
            .base_sizes
            .iter()
            .chain(&self.scales)
            .chain(&self.ratios)
            .any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return Err(invalid("base_sizes", "sizes, scales and ratios must be positive"));
        }
        if self.feature_channels == 0 {
            return Err(invalid("feature_channels", "must be positive"));
        }
        Ok(())
    }

    pub fn check_image(&self, h: usize, w: usize) -> Result<()> {
        let s = self.max_stride();
        if h == 0 || w == 0 || !h.is_multiple_of(s) || !w.is_multiple_of(s) {
            return Err(Error::IndivisibleImage { h, w, stride: s });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelLayout {
    pub stride: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub anchors_per_cell: usize,
    /// Index of this level's first anchor in the flat list.
    pub offset: usize,
}

impl LevelLayout {
    pub fn count(&self) -> usize {
        self.grid_h * self.grid_w * self.anchors_per_cell
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub levels: Vec<LevelLayout>,
    pub boxes: Vec<BBox>,
    pub image_h: usize,
    pub image_w: usize,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

/// Anchor of one cell: centered on the cell, width `s*k/sqrt(r)`, height
/// `s*k*sqrt(r)`.
pub fn cell_anchor(stride: usize, row: usize, col: usize, size: f64, scale: f64, ratio: f64) -> BBox {
    let cx = (col as f64 + 0.5) * stride as f64;
    let cy = (row as f64 + 0.5) * stride as f64;
    let w = size * scale / ratio.sqrt();
    let h = size * scale * ratio.sqrt();
    BBox::from_center(cx, cy, w, h)
}

pub fn generate_anchors(image_h: usize, image_w: usize, cfg: &PyramidConfig) -> Result<AnchorSet> {
    cfg.validate()?;
    cfg.check_image(image_h, image_w)?;
    let per_cell = cfg.anchors_per_cell();
    let mut levels = Vec::with_capacity(cfg.strides.len());
    let mut boxes = Vec::new();
    for (&stride, &size) in cfg.strides.iter().zip(&cfg.base_sizes) {
        let (gh, gw) = (image_h / stride, image_w / stride);
        levels.push(LevelLayout {
            stride,
            grid_h: gh,
            grid_w: gw,
            anchors_per_cell: per_cell,
            offset: boxes.len(),
        });
        for row in 0..gh {
            for col in 0..gw {
                for &scale in &cfg.scales {
                    for &ratio in &cfg.ratios {
                        boxes.push(cell_anchor(stride, row, col, size, scale, ratio));
                    }
                }
            }
        }
    }
    Ok(AnchorSet {
        levels,
        boxes,
        image_h,
        image_w,
    })
}
