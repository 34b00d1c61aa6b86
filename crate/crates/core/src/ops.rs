//! Forward and backward kernels for the detector's op set.
//!
//! Every kernel is a pure function. Convolution accumulates each output element
//! over `(channel, kernel row, kernel column)` in that order, starting from zero,
//! and adds the bias last; padded taps contribute an explicit `w * 0`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};
use crate::tensor::Tensor;

/// Geometry of one 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn new<T: Scalar>(
        input: &Tensor<T>,
        weight: &Tensor<T>,
        bias: &Tensor<T>,
        stride: usize,
        padding: usize,
    ) -> Result<ConvGeom> {
        let [n, c, h, w] = input.dims4("conv2d")?;
        let [o, i, kh, kw] = weight.dims4("conv2d")?;
        if i != c {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                expected: vec![o, c, kh, kw],
                got: weight.shape().to_vec(),
            });
        }
        if !matches!((kh, kw), (1, 1) | (3, 3)) {
            return Err(Error::InvalidShape {
                shape: weight.shape().to_vec(),
                reason: "kernel must be 1x1 or 3x3".into(),
            });
        }
        if bias.shape() != [o] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                expected: vec![o],
                got: bias.shape().to_vec(),
            });
        }
        if stride == 0 {
            return Err(crate::error::invalid("stride", "must be positive"));
        }
        if h + 2 * padding < kh || w + 2 * padding < kw {
            return Err(Error::InvalidShape {
                shape: input.shape().to_vec(),
                reason: "input smaller than kernel".into(),
            });
        }
        Ok(ConvGeom {
            batch: n,
            in_c: c,
            in_h: h,
            in_w: w,
            out_c: o,
            k_h: kh,
            k_w: kw,
            stride,
            padding,
            out_h: (h + 2 * padding - kh) / stride + 1,
            out_w: (w + 2 * padding - kw) / stride + 1,
        })
    }

    fn taps(&self) -> usize {
        self.in_c * self.k_h * self.k_w
    }

    fn out_pixels(&self) -> usize {
        self.out_h * self.out_w
    }

    fn in_pixels(&self) -> usize {
        self.in_h * self.in_w
    }

    /// Input coordinate of output `o` along one axis for kernel offset `k`,
    /// or `None` when it falls in the zero padding.
    #[inline]
    fn source(&self, out: usize, k: usize, extent: usize) -> Option<usize> {
        let pos = (out * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }

    /// Unfolds one sample into a `taps x out_pixels` matrix.
    fn im2col<T: Scalar>(&self, sample: &[T], col: &mut [T]) {
        let p_len = self.out_pixels();
        for c in 0..self.in_c {
            let plane = &sample[c * self.in_pixels()..(c + 1) * self.in_pixels()];
            for ky in 0..self.k_h {
                for kx in 0..self.k_w {
                    let k = (c * self.k_h + ky) * self.k_w + kx;
                    let row = &mut col[k * p_len..(k + 1) * p_len];
                    for y in 0..self.out_h {
                        let dst = &mut row[y * self.out_w..(y + 1) * self.out_w];
                        match self.source(y, ky, self.in_h) {
                            None => dst.fill(T::zero()),
                            Some(iy) => {
                                let src = &plane[iy * self.in_w..(iy + 1) * self.in_w];
                                for (x, d) in dst.iter_mut().enumerate() {
                                    *d = match self.source(x, kx, self.in_w) {
                                        Some(ix) => src[ix],
                                        None => T::zero(),
                                    };
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Folds a `taps x out_pixels` gradient back onto one input sample.
    fn col2im<T: Scalar>(&self, col: &[T], sample: &mut [T]) {
        let p_len = self.out_pixels();
        for c in 0..self.in_c {
            let plane = &mut sample[c * self.in_pixels()..(c + 1) * self.in_pixels()];
            for ky in 0..self.k_h {
                for kx in 0..self.k_w {
                    let k = (c * self.k_h + ky) * self.k_w + kx;
                    let row = &col[k * p_len..(k + 1) * p_len];
                    for y in 0..self.out_h {
                        let Some(iy) = self.source(y, ky, self.in_h) else {
                            continue;
                        };
                        for x in 0..self.out_w {
                            if let Some(ix) = self.source(x, kx, self.in_w) {
                                plane[iy * self.in_w + ix] += row[y * self.out_w + x];
                            }
                        }
                    }
                }
            }
        }
    }

    fn is_pointwise(&self) -> bool {
        self.k_h == 1 && self.k_w == 1 && self.stride == 1 && self.padding == 0
    }
}

/// Dot product with eight fixed partial sums, reduced in a fixed order.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        let (x, y) = (&a[i * 8..i * 8 + 8], &b[i * 8..i * 8 + 8]);
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    let lo = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    let hi = (acc[4] + acc[5]) + (acc[6] + acc[7]);
    (lo + hi) + tail
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (d, &s) in y.iter_mut().zip(x) {
        *d += alpha * s;
    }
}

pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let g = ConvGeom::new(input, weight, bias, stride, padding)?;
    let (taps, p_len) = (g.taps(), g.out_pixels());
    let in_len = g.in_c * g.in_pixels();
    let mut out = vec![T::zero(); g.batch * g.out_c * p_len];
    let mut col = vec![T::zero(); if g.is_pointwise() { 0 } else { taps * p_len }];
    let w = weight.data();
    for n in 0..g.batch {
        let sample = &input.data()[n * in_len..(n + 1) * in_len];
        let col: &[T] = if g.is_pointwise() {
            sample
        } else {
            g.im2col(sample, &mut col);
            &col
        };
        let out_n = &mut out[n * g.out_c * p_len..(n + 1) * g.out_c * p_len];
        for o in 0..g.out_c {
            let row = &mut out_n[o * p_len..(o + 1) * p_len];
            for k in 0..taps {
                axpy(w[o * taps + k], &col[k * p_len..(k + 1) * p_len], row);
            }
            let b = bias.data()[o];
            for v in row.iter_mut() {
                *v += b;
            }
        }
    }
    Tensor::new([g.batch, g.out_c, g.out_h, g.out_w], out)?.check_finite("conv2d")
}

/// Gradients of a convolution with respect to input, weight and bias.
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let g = ConvGeom::new(input, weight, bias, stride, padding)?;
    let expected = [g.batch, g.out_c, g.out_h, g.out_w];
    if grad_out.shape() != expected {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward",
            expected: expected.to_vec(),
            got: grad_out.shape().to_vec(),
        });
    }
    let (taps, p_len) = (g.taps(), g.out_pixels());
    let in_len = g.in_c * g.in_pixels();
    let w = weight.data();
    let mut d_in = vec![T::zero(); input.len()];
    let mut d_w = vec![T::zero(); weight.len()];
    let mut d_b = vec![T::zero(); g.out_c];
    let mut col = vec![T::zero(); if g.is_pointwise() { 0 } else { taps * p_len }];
    let mut d_col = vec![T::zero(); if g.is_pointwise() { 0 } else { taps * p_len }];
    for n in 0..g.batch {
        let sample = &input.data()[n * in_len..(n + 1) * in_len];
        let dy = &grad_out.data()[n * g.out_c * p_len..(n + 1) * g.out_c * p_len];
        let col: &[T] = if g.is_pointwise() {
            sample
        } else {
            g.im2col(sample, &mut col);
            &col
        };
        for o in 0..g.out_c {
            let dy_o = &dy[o * p_len..(o + 1) * p_len];
            d_b[o] += dy_o.iter().copied().sum::<T>();
            for k in 0..taps {
                d_w[o * taps + k] += dot(dy_o, &col[k * p_len..(k + 1) * p_len]);
            }
        }
        let d_in_n = &mut d_in[n * in_len..(n + 1) * in_len];
        let target: &mut [T] = if g.is_pointwise() {
            d_in_n
        } else {
            d_col.fill(T::zero());
            &mut d_col
        };
        for o in 0..g.out_c {
            let dy_o = &dy[o * p_len..(o + 1) * p_len];
            for k in 0..taps {
                axpy(w[o * taps + k], dy_o, &mut target[k * p_len..(k + 1) * p_len]);
            }
        }
        if !g.is_pointwise() {
            g.col2im(&d_col, &mut d_in[n * in_len..(n + 1) * in_len]);
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape(), d_in)?,
        weight: Tensor::new(weight.shape(), d_w)?,
        bias: Tensor::new(bias.shape(), d_b)?,
    })
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.max(T::zero()))
}

/// Subgradient convention: zero at the kink.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(x.shape(), data).expect("shape preserved")
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(scalar::sigmoid)
}

pub fn sigmoid_backward<T: Scalar>(y: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let data = y
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&s, &g)| g * s * (T::one() - s))
        .collect();
    Tensor::new(y.shape(), data).expect("shape preserved")
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.same_shape(b, "add")?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    Tensor::new(a.shape(), data)?.check_finite("add")
}

pub fn upsample_nearest2x<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4("upsample_nearest2x")?;
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in x.data().chunks_exact(h * w) {
        for y in 0..oh {
            let src = &plane[(y / 2) * w..(y / 2 + 1) * w];
            for xx in 0..ow {
                out.push(src[xx / 2]);
            }
        }
    }
    Tensor::new([n, c, oh, ow], out)
}

pub fn upsample_nearest2x_backward<T: Scalar>(grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, oh, ow] = grad_out.dims4("upsample_nearest2x_backward")?;
    let (h, w) = (oh / 2, ow / 2);
    let mut out = vec![T::zero(); n * c * h * w];
    for (plane, dst) in grad_out.data().chunks_exact(oh * ow).zip(out.chunks_exact_mut(h * w)) {
        for y in 0..oh {
            for x in 0..ow {
                dst[(y / 2) * w + x / 2] += plane[y * ow + x];
            }
        }
    }
    Tensor::new([n, c, h, w], out)
}
