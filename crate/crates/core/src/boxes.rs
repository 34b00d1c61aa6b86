//! Axis-aligned boxes, IoU and the center/size box codec.

use alloc::vec::Vec;

// Unused when std is linked into the build, whose inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Box in pixel coordinates; width is `x2 - x1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BBox { x1, y1, x2, y2 }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BBox::new(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn is_valid(&self) -> bool {
        self.x2 >= self.x1 && self.y2 >= self.y1 && self.x1.is_finite() && self.y2.is_finite()
    }

    pub fn intersection(&self, other: &BBox) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        w * h
    }

    /// Clamps into `[0, width] x [0, height]`.
    pub fn clip(&self, width: f64, height: f64) -> BBox {
        let cx = |v: f64| v.clamp(0.0, width);
        let cy = |v: f64| v.clamp(0.0, height);
        BBox::new(cx(self.x1), cy(self.y1), cx(self.x2), cy(self.y2))
    }

    /// Horizontal mirror inside an image of the given width.
    pub fn hflip(&self, width: f64) -> BBox {
        BBox::new(width - self.x2, self.y1, width - self.x1, self.y2)
    }
}

/// Intersection over union; zero when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Row-major `a.len() x b.len()` IoU table.
pub fn iou_matrix(a: &[BBox], b: &[BBox]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(iou(x, y));
        }
    }
    out
}

/// Regression target of `gt` relative to `anchor`: `(tx, ty, tw, th)`.
pub fn encode(anchor: &BBox, gt: &BBox) -> Result<[f64; 4]> {
    let (wa, ha) = (anchor.width(), anchor.height());
    let (wg, hg) = (gt.width(), gt.height());
    if !(wg > 0.0 && hg > 0.0) {
        return Err(Error::DegenerateBox { w: wg, h: hg });
    }
    if !(wa > 0.0 && ha > 0.0) {
        return Err(Error::DegenerateBox { w: wa, h: ha });
    }
    let (xa, ya) = anchor.center();
    let (xg, yg) = gt.center();
    Ok([(xg - xa) / wa, (yg - ya) / ha, (wg / wa).ln(), (hg / ha).ln()])
}

/// Exact inverse of [`encode`]. No clipping.
pub fn decode(anchor: &BBox, delta: [f64; 4]) -> BBox {
    let (wa, ha) = (anchor.width(), anchor.height());
    let (xa, ya) = anchor.center();
    BBox::from_center(
        xa + delta[0] * wa,
        ya + delta[1] * ha,
        wa * delta[2].exp(),
        ha * delta[3].exp(),
    )
}

pub fn encode_boxes(anchors: &[BBox], gts: &[BBox]) -> Result<Vec<[f64; 4]>> {
    if anchors.len() != gts.len() {
        return Err(Error::ShapeMismatch {
            op: "encode_boxes",
            expected: alloc::vec![anchors.len()],
            got: alloc::vec![gts.len()],
        });
    }
    anchors.iter().zip(gts).map(|(a, g)| encode(a, g)).collect()
}

pub fn decode_boxes(anchors: &[BBox], deltas: &[[f64; 4]]) -> Result<Vec<BBox>> {
    if anchors.len() != deltas.len() {
        return Err(Error::ShapeMismatch {
            op: "decode_boxes",
            expected: alloc::vec![anchors.len()],
            got: alloc::vec![deltas.len()],
        });
    }
    Ok(anchors.iter().zip(deltas).map(|(a, &d)| decode(a, d)).collect())
}
