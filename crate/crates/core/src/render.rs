//! Raster overlay of detections.

// Unused when std is linked into the build, whose inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::model::Detection;
use crate::tensor::Tensor;

/// Default per-class colors, cycled by class id.
pub const PALETTE: [[u8; 3]; 6] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
];

/// Pixel rectangle covered by a box: columns `left..=right`, rows
/// `top..=bottom`.
fn pixel_rect(d: &Detection) -> (i64, i64, i64, i64) {
    let b = d.bbox;
    (
        b.x1.round() as i64,
        b.y1.round() as i64,
        b.x2.round() as i64 - 1,
        b.y2.round() as i64 - 1,
    )
}

/// Copy of a `3 x H x W` image (values 0-255) with each box's perimeter drawn
/// `line_width` pixels thick, inward, in its class color. Pixels outside the
/// image are skipped.
pub fn render_detections(
    image: &Tensor<f32>,
    detections: &[Detection],
    palette: &[[u8; 3]],
    line_width: usize,
) -> Tensor<f32> {
    let mut out = image.clone();
    let (h, w) = (image.shape()[1] as i64, image.shape()[2] as i64);
    let plane = (h * w) as usize;
    let lw = line_width.max(1) as i64;
    for d in detections {
        let color = palette[d.class_id % palette.len()];
        let (l, t, r, b) = pixel_rect(d);
        if r < l || b < t {
            continue;
        }
        for y in t.max(0)..=b.min(h - 1) {
            for x in l.max(0)..=r.min(w - 1) {
                let on_edge = x - l < lw || r - x < lw || y - t < lw || b - y < lw;
                if on_edge {
                    let at = (y * w + x) as usize;
                    for (c, &v) in color.iter().enumerate() {
                        out.data_mut()[c * plane + at] = v as f32;
                    }
                }
            }
        }
    }
    out
}
