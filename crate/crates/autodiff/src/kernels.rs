//! Forward and backward kernels for the layer primitives.
//!
//! Everything here works on flat row-major slices; shape validation happens
//! in the graph layer before these are called.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2, ShapeBuilder};

use crate::error::{config_err, dim_err, Result};

/// `c = alpha * op(a) * op(b) + beta * c` where `op` optionally transposes.
///
/// `a` is stored row-major as `rows_a x cols_a`, likewise `b`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    alpha: f64,
    a: &[f64],
    (rows_a, cols_a): (usize, usize),
    trans_a: bool,
    b: &[f64],
    (rows_b, cols_b): (usize, usize),
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    let a = ArrayView2::from_shape((rows_a, cols_a), a).expect("gemm lhs shape");
    let b = ArrayView2::from_shape((rows_b, cols_b), b).expect("gemm rhs shape");
    let a = if trans_a { a.reversed_axes() } else { a };
    let b = if trans_b { b.reversed_axes() } else { b };
    let (m, n) = (a.nrows(), b.ncols());
    let mut c = ArrayViewMut2::from_shape((m, n).strides((n, 1)), c).expect("gemm output shape");
    general_mat_mul(alpha, &a, &b, beta, &mut c);
}

/// Geometry of a 2-D convolution over a `[B, Cin, H, W]` input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(input: &[usize], kernel: &[usize], stride: usize, padding: usize) -> Result<Self> {
        if input.len() != 4 {
            return dim_err("conv2d", format!("input must be [B,C,H,W], got {input:?}"));
        }
        if kernel.len() != 4 {
            return dim_err("conv2d", format!("kernel must be [Cout,Cin,kh,kw], got {kernel:?}"));
        }
        if kernel[1] != input[1] {
            return dim_err(
                "conv2d",
                format!("kernel expects {} input channels, input has {}", kernel[1], input[1]),
            );
        }
        if stride == 0 {
            return config_err("conv2d", "stride must be positive");
        }
        let out_h = out_extent(input[2], kernel[2], stride, padding)?;
        let out_w = out_extent(input[3], kernel[3], stride, padding)?;
        Ok(Self {
            batch: input[0],
            in_channels: input[1],
            height: input[2],
            width: input[3],
            out_channels: kernel[0],
            kernel_h: kernel[2],
            kernel_w: kernel[3],
            stride,
            padding,
            out_h,
            out_w,
        })
    }

    fn col_rows(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    fn in_sample(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    /// A 1x1, stride-1, unpadded convolution needs no unfolding.
    fn is_pointwise(&self) -> bool {
        self.kernel_h == 1 && self.kernel_w == 1 && self.stride == 1 && self.padding == 0
    }
}

fn out_extent(size: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = size + 2 * padding;
    if padded < kernel || (padded - kernel) % stride != 0 {
        return config_err(
            "conv2d",
            format!(
                "extent {size} with padding {padding}, kernel {kernel}, stride {stride} \
                 does not give an integral output"
            ),
        );
    }
    Ok((padded - kernel) / stride + 1)
}

fn im2col(x: &[f64], g: &ConvGeometry, cols: &mut [f64]) {
    let plane = g.out_plane();
    let mut row = 0;
    for c in 0..g.in_channels {
        let xc = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..g.kernel_h {
            for kx in 0..g.kernel_w {
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    let out_row = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.height as isize {
                        out_row.fill(0.0);
                        continue;
                    }
                    let src = &xc[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for (ox, o) in out_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        *o = if ix < 0 || ix >= g.width as isize { 0.0 } else { src[ix as usize] };
                    }
                }
                row += 1;
            }
        }
    }
}

fn col2im(cols: &[f64], g: &ConvGeometry, dx: &mut [f64]) {
    let plane = g.out_plane();
    let mut row = 0;
    for c in 0..g.in_channels {
        let dxc = &mut dx[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..g.kernel_h {
            for kx in 0..g.kernel_w {
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst = &mut dxc[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        if ix >= 0 && ix < g.width as isize {
                            dst[ix as usize] += src[oy * g.out_w + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

pub(crate) fn conv2d_forward(x: &[f64], kernel: &[f64], bias: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let plane = g.out_plane();
    let rows = g.col_rows();
    let mut out = vec![0.0; g.batch * g.out_channels * plane];
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![0.0; rows * plane] };
    for b in 0..g.batch {
        let xb = &x[b * g.in_sample()..(b + 1) * g.in_sample()];
        let ob = &mut out[b * g.out_channels * plane..(b + 1) * g.out_channels * plane];
        for (c, chunk) in ob.chunks_mut(plane).enumerate() {
            chunk.fill(bias[c]);
        }
        let cols_ref: &[f64] = if g.is_pointwise() {
            xb
        } else {
            im2col(xb, g, &mut cols);
            &cols
        };
        gemm(
            1.0,
            kernel,
            (g.out_channels, rows),
            false,
            cols_ref,
            (rows, plane),
            false,
            1.0,
            ob,
        );
    }
    out
}

pub(crate) struct ConvGrads {
    pub input: Option<Vec<f64>>,
    pub kernel: Option<Vec<f64>>,
    pub bias: Option<Vec<f64>>,
}

pub(crate) fn conv2d_backward(
    x: &[f64],
    kernel: &[f64],
    dout: &[f64],
    g: &ConvGeometry,
    need: (bool, bool, bool),
) -> ConvGrads {
    let (need_x, need_k, need_b) = need;
    let plane = g.out_plane();
    let rows = g.col_rows();
    let mut dx = need_x.then(|| vec![0.0; x.len()]);
    let mut dk = need_k.then(|| vec![0.0; kernel.len()]);
    let mut db = need_b.then(|| vec![0.0; g.out_channels]);
    let mut cols = if need_k && !g.is_pointwise() { vec![0.0; rows * plane] } else { Vec::new() };
    let mut dcols = if need_x && !g.is_pointwise() { vec![0.0; rows * plane] } else { Vec::new() };

    for b in 0..g.batch {
        let xb = &x[b * g.in_sample()..(b + 1) * g.in_sample()];
        let gb = &dout[b * g.out_channels * plane..(b + 1) * g.out_channels * plane];
        if let Some(db) = db.as_mut() {
            for (c, chunk) in gb.chunks(plane).enumerate() {
                db[c] += chunk.iter().sum::<f64>();
            }
        }
        if let Some(dk) = dk.as_mut() {
            let cols_ref: &[f64] = if g.is_pointwise() {
                xb
            } else {
                im2col(xb, g, &mut cols);
                &cols
            };
            gemm(1.0, gb, (g.out_channels, plane), false, cols_ref, (rows, plane), true, 1.0, dk);
        }
        if let Some(dx) = dx.as_mut() {
            let dxb = &mut dx[b * g.in_sample()..(b + 1) * g.in_sample()];
            if g.is_pointwise() {
                gemm(1.0, kernel, (g.out_channels, rows), true, gb, (g.out_channels, plane), false, 1.0, dxb);
            } else {
                gemm(
                    1.0,
                    kernel,
                    (g.out_channels, rows),
                    true,
                    gb,
                    (g.out_channels, plane),
                    false,
                    0.0,
                    &mut dcols,
                );
                col2im(&dcols, g, dxb);
            }
        }
    }
    ConvGrads { input: dx, kernel: dk, bias: db }
}

/// Output extent of a window/stride reduction, or a configuration error.
pub(crate) fn pool_extent(size: usize, window: usize, stride: usize) -> Result<usize> {
    if window == 0 || stride == 0 {
        return config_err("max_pool2d", "window and stride must be positive");
    }
    if size < window || (size - window) % stride != 0 {
        return config_err(
            "max_pool2d",
            format!("extent {size} with window {window}, stride {stride} is not integral"),
        );
    }
    Ok((size - window) / stride + 1)
}

/// Max pooling; returns the pooled values and, per output, the flat input
/// index of the first maximal element in scan order.
pub(crate) fn max_pool_forward(
    x: &[f64],
    shape: &[usize],
    window: usize,
    stride: usize,
    (out_h, out_w): (usize, usize),
) -> (Vec<f64>, Vec<usize>) {
    let (planes, h, w) = (shape[0] * shape[1], shape[2], shape[3]);
    let mut out = Vec::with_capacity(planes * out_h * out_w);
    let mut argmax = Vec::with_capacity(out.capacity());
    for p in 0..planes {
        let base = p * h * w;
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = base + oy * stride * w + ox * stride;
                for ky in 0..window {
                    let row = base + (oy * stride + ky) * w + ox * stride;
                    for kx in 0..window {
                        let v = x[row + kx];
                        if v > best {
                            best = v;
                            best_idx = row + kx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    (out, argmax)
}

pub(crate) fn upsample_forward(x: &[f64], shape: &[usize], factor: usize) -> Vec<f64> {
    let (planes, h, w) = (shape[0] * shape[1], shape[2], shape[3]);
    let (oh, ow) = (h * factor, w * factor);
    let mut out = vec![0.0; planes * oh * ow];
    for p in 0..planes {
        for oy in 0..oh {
            let src = &x[p * h * w + (oy / factor) * w..][..w];
            let dst = &mut out[p * oh * ow + oy * ow..][..ow];
            for (ox, d) in dst.iter_mut().enumerate() {
                *d = src[ox / factor];
            }
        }
    }
    out
}

pub(crate) fn upsample_backward(dout: &[f64], shape: &[usize], factor: usize) -> Vec<f64> {
    let (planes, h, w) = (shape[0] * shape[1], shape[2], shape[3]);
    let (oh, ow) = (h * factor, w * factor);
    let mut dx = vec![0.0; planes * h * w];
    for p in 0..planes {
        for oy in 0..oh {
            let src = &dout[p * oh * ow + oy * ow..][..ow];
            let dst = &mut dx[p * h * w + (oy / factor) * w..][..w];
            for (ox, g) in src.iter().enumerate() {
                dst[ox / factor] += g;
            }
        }
    }
    dx
}

/// `out[b] = weight * x[b] + bias` for `x: [B, N]`, `weight: [M, N]`.
pub(crate) fn linear_forward(x: &[f64], weight: &[f64], bias: &[f64], batch: usize, n: usize, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * m);
    for _ in 0..batch {
        out.extend_from_slice(bias);
    }
    gemm(1.0, x, (batch, n), false, weight, (m, n), true, 1.0, &mut out);
    out
}
