//! Binary PPM (P6, maxval 255) images as `3 x H x W` tensors in `[0, 255]`.

use ddet_core::tensor::Tensor;

use crate::error::{Error, Result};

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Ppm(format!("missing or invalid {what}")))
    }
}

pub fn load_ppm(bytes: &[u8]) -> Result<Tensor<f32>> {
    if !bytes.starts_with(b"P6") {
        return Err(Error::Ppm("wrong magic, expected P6".into()));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Ppm(format!("unsupported maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Ppm(format!("empty image {width}x{height}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Ppm("missing whitespace after maxval".into()));
    }
    let raster = &bytes[h.pos + 1..];
    let plane = width * height;
    if raster.len() < 3 * plane {
        return Err(Error::Ppm(format!(
            "truncated pixel data: expected {} bytes, found {}",
            3 * plane,
            raster.len()
        )));
    }
    let mut data = vec![0.0f32; 3 * plane];
    for (i, px) in raster[..3 * plane].chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px[c] as f32;
        }
    }
    Ok(Tensor::new([3, height, width], data)?)
}

/// Encodes a `3 x H x W` image; values are rounded and clamped to `[0, 255]`.
pub fn encode_ppm(image: &Tensor<f32>) -> Result<Vec<u8>> {
    let shape = image.shape();
    if shape.len() != 3 || shape[0] != 3 {
        return Err(Error::Ppm(format!("cannot encode tensor of shape {shape:?}")));
    }
    let (height, width) = (shape[1], shape[2]);
    let plane = width * height;
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(3 * plane);
    let d = image.data();
    for i in 0..plane {
        for c in 0..3 {
            out.push(d[c * plane + i].round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(out)
}
