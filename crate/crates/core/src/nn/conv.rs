use ndarray::{linalg::general_mat_mul, Array2, Array4, ArrayD, Axis, IxDyn};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::param::{join, Param, Parameterized};
use crate::error::{shape_mismatch, Result};
use crate::scalar::Scalar;

/// Sliding-window geometry of a square-kernel convolution over one image plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_height: usize,
    pub out_width: usize,
}

/// Output extent of a convolution: `floor((n + 2p - k) / s) + 1`.
pub fn conv_out(n: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    (n + 2 * pad).checked_sub(kernel).map(|v| v / stride + 1)
}

/// Output extent of a transposed convolution: `(n - 1) s - 2p + k`.
pub fn deconv_out(n: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    ((n.checked_sub(1)?) * stride + kernel).checked_sub(2 * pad)
}

impl Geometry {
    pub fn new(channels: usize, height: usize, width: usize, kernel: usize, stride: usize, pad: usize) -> Option<Self> {
        Some(Self {
            channels,
            height,
            width,
            kernel,
            stride,
            pad,
            out_height: conv_out(height, kernel, stride, pad)?,
            out_width: conv_out(width, kernel, stride, pad)?,
        })
    }

    pub fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn positions(&self) -> usize {
        self.out_height * self.out_width
    }

    /// Unfolds `img` (C×H×W, contiguous) into columns `cols[row, col_offset + pos]`
    /// of a row-major matrix with `ld` columns.
    fn im2col<T: Scalar>(&self, img: &[T], cols: &mut [T], ld: usize, col_offset: usize) {
        let (k, s, p) = (self.kernel, self.stride, self.pad as isize);
        let (h, w) = (self.height as isize, self.width as isize);
        let (ho, wo) = (self.out_height, self.out_width);
        for c in 0..self.channels {
            let plane = &img[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..k {
                for kj in 0..k {
                    let row = (c * k + ki) * k + kj;
                    let dst = &mut cols[row * ld + col_offset..row * ld + col_offset + ho * wo];
                    for oy in 0..ho {
                        let iy = (oy * s + ki) as isize - p;
                        let out_row = &mut dst[oy * wo..(oy + 1) * wo];
                        if iy < 0 || iy >= h {
                            out_row.fill(T::zero());
                            continue;
                        }
                        let src = &plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        for (ox, v) in out_row.iter_mut().enumerate() {
                            let ix = (ox * s + kj) as isize - p;
                            *v = if ix < 0 || ix >= w { T::zero() } else { src[ix as usize] };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Geometry::im2col`]: scatters columns back, accumulating into `img`.
    fn col2im<T: Scalar>(&self, cols: &[T], ld: usize, col_offset: usize, img: &mut [T]) {
        let (k, s, p) = (self.kernel, self.stride, self.pad as isize);
        let (h, w) = (self.height as isize, self.width as isize);
        let (ho, wo) = (self.out_height, self.out_width);
        for c in 0..self.channels {
            let plane = &mut img[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..k {
                for kj in 0..k {
                    let row = (c * k + ki) * k + kj;
                    let src = &cols[row * ld + col_offset..row * ld + col_offset + ho * wo];
                    for oy in 0..ho {
                        let iy = (oy * s + ki) as isize - p;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        for (ox, &v) in src[oy * wo..(oy + 1) * wo].iter().enumerate() {
                            let ix = (ox * s + kj) as isize - p;
                            if ix >= 0 && ix < w {
                                dst[ix as usize] = dst[ix as usize] + v;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `(B, C, H, W)` ⇄ `(C, B·H·W)` channel-major matrices for batched GEMMs.
fn nchw_to_cm<T: Scalar>(x: &Array4<T>) -> Array2<T> {
    let (b, c, h, w) = x.dim();
    let mut out = Array2::zeros((c, b * h * w));
    let src = x.as_slice().expect("contiguous");
    let dst = out.as_slice_mut().expect("contiguous");
    let hw = h * w;
    for bi in 0..b {
        for ci in 0..c {
            dst[ci * b * hw + bi * hw..ci * b * hw + (bi + 1) * hw]
                .copy_from_slice(&src[(bi * c + ci) * hw..(bi * c + ci + 1) * hw]);
        }
    }
    out
}

fn cm_to_nchw<T: Scalar>(m: &Array2<T>, b: usize, h: usize, w: usize) -> Array4<T> {
    let c = m.nrows();
    let hw = h * w;
    let mut out = Array4::zeros((b, c, h, w));
    let src = m.as_slice().expect("contiguous");
    let dst = out.as_slice_mut().expect("contiguous");
    for bi in 0..b {
        for ci in 0..c {
            dst[(bi * c + ci) * hw..(bi * c + ci + 1) * hw]
                .copy_from_slice(&src[ci * b * hw + bi * hw..ci * b * hw + (bi + 1) * hw]);
        }
    }
    out
}

fn contiguous<T: Scalar>(x: &Array4<T>) -> Array4<T> {
    if x.is_standard_layout() {
        x.clone()
    } else {
        x.as_standard_layout().into_owned()
    }
}

fn gaussian<T: Scalar>(shape: &[usize], std: f64, rng: &mut impl Rng) -> ArrayD<T> {
    let normal = Normal::new(0.0, std).expect("finite std");
    ArrayD::from_shape_simple_fn(IxDyn(shape), || T::from_f64_lossy(normal.sample(rng)))
}

/// 2-D convolution with a square kernel, zero padding and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    geometry: Geometry,
    batch: usize,
    cols: Array2<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, pad: usize) -> Self {
        Self {
            weight: Param::zeros(&[out_channels, in_channels, kernel, kernel]),
            bias: Param::zeros(&[out_channels]),
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
        }
    }

    pub fn init_normal(&mut self, std: f64, rng: &mut impl Rng) {
        self.weight.value = gaussian(self.weight.value.shape(), std, rng);
        self.bias.value.fill(T::zero());
    }

    /// `k·k·c_in·c_out + c_out`.
    pub fn param_count(&self) -> usize {
        self.kernel * self.kernel * self.in_channels * self.out_channels + self.out_channels
    }

    pub fn output_size(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        Some((
            conv_out(h, self.kernel, self.stride, self.pad)?,
            conv_out(w, self.kernel, self.stride, self.pad)?,
        ))
    }

    fn weight_matrix(&self) -> ndarray::ArrayView2<'_, T> {
        let rows = self.in_channels * self.kernel * self.kernel;
        self.weight
            .value
            .view()
            .into_shape_with_order((self.out_channels, rows))
            .expect("weight is contiguous")
    }

    pub fn forward(&self, x: &Array4<T>) -> Result<(Array4<T>, ConvCache<T>)> {
        let (b, c, h, w) = x.dim();
        if c != self.in_channels {
            return Err(shape_mismatch(format!("{} input channels", self.in_channels), x.dim()));
        }
        let geometry = Geometry::new(c, h, w, self.kernel, self.stride, self.pad)
            .ok_or_else(|| shape_mismatch(format!("spatial size >= kernel {}", self.kernel), x.dim()))?;
        let x = contiguous(x);
        let src = x.as_slice().expect("contiguous");
        let pos = geometry.positions();
        let ld = b * pos;
        let mut cols = Array2::zeros((geometry.rows(), ld));
        {
            let dst = cols.as_slice_mut().expect("contiguous");
            for bi in 0..b {
                geometry.im2col(&src[bi * c * h * w..(bi + 1) * c * h * w], dst, ld, bi * pos);
            }
        }
        let mut out = Array2::zeros((self.out_channels, ld));
        general_mat_mul(T::one(), &self.weight_matrix(), &cols, T::zero(), &mut out);
        for (mut row, &bias) in out.axis_iter_mut(Axis(0)).zip(self.bias.value.iter()) {
            row.mapv_inplace(|v| v + bias);
        }
        let y = cm_to_nchw(&out, b, geometry.out_height, geometry.out_width);
        Ok((y, ConvCache { geometry, batch: b, cols }))
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &ConvCache<T>, dy: &Array4<T>) -> Array4<T> {
        let g = cache.geometry;
        let b = cache.batch;
        let dy_m = nchw_to_cm(&contiguous(dy));
        let rows = g.rows();
        {
            let mut dw = self
                .weight
                .grad
                .view_mut()
                .into_shape_with_order((self.out_channels, rows))
                .expect("grad is contiguous");
            general_mat_mul(T::one(), &dy_m, &cache.cols.t(), T::one(), &mut dw);
        }
        for (gb, row) in self.bias.grad.iter_mut().zip(dy_m.axis_iter(Axis(0))) {
            *gb = *gb + row.sum();
        }
        let mut dcols = Array2::zeros((rows, b * g.positions()));
        general_mat_mul(T::one(), &self.weight_matrix().t(), &dy_m, T::zero(), &mut dcols);
        let mut dx = Array4::zeros((b, g.channels, g.height, g.width));
        {
            let plane = g.channels * g.height * g.width;
            let dst = dx.as_slice_mut().expect("contiguous");
            let src = dcols.as_slice().expect("contiguous");
            for bi in 0..b {
                g.col2im(src, b * g.positions(), bi * g.positions(), &mut dst[bi * plane..(bi + 1) * plane]);
            }
        }
        dx
    }
}

impl<T: Scalar> Parameterized<T> for Conv2d<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

/// Transposed convolution (fractionally strided), the adjoint of [`Conv2d`]'s data path.
/// Weight layout is `(C_in, C_out, k, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose2d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

#[derive(Debug, Clone)]
pub struct DeconvCache<T> {
    geometry: Geometry,
    batch: usize,
    x_cm: Array2<T>,
}

impl<T: Scalar> ConvTranspose2d<T> {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, pad: usize) -> Self {
        Self {
            weight: Param::zeros(&[in_channels, out_channels, kernel, kernel]),
            bias: Param::zeros(&[out_channels]),
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
        }
    }

    pub fn init_normal(&mut self, std: f64, rng: &mut impl Rng) {
        self.weight.value = gaussian(self.weight.value.shape(), std, rng);
        self.bias.value.fill(T::zero());
    }

    pub fn param_count(&self) -> usize {
        self.kernel * self.kernel * self.in_channels * self.out_channels + self.out_channels
    }

    pub fn output_size(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        Some((
            deconv_out(h, self.kernel, self.stride, self.pad)?,
            deconv_out(w, self.kernel, self.stride, self.pad)?,
        ))
    }

    fn weight_matrix(&self) -> ndarray::ArrayView2<'_, T> {
        let cols = self.out_channels * self.kernel * self.kernel;
        self.weight
            .value
            .view()
            .into_shape_with_order((self.in_channels, cols))
            .expect("weight is contiguous")
    }

    pub fn forward(&self, x: &Array4<T>) -> Result<(Array4<T>, DeconvCache<T>)> {
        let (b, c, h, w) = x.dim();
        if c != self.in_channels {
            return Err(shape_mismatch(format!("{} input channels", self.in_channels), x.dim()));
        }
        let (ho, wo) = self
            .output_size(h, w)
            .ok_or_else(|| shape_mismatch("non-empty output", x.dim()))?;
        // the output plane viewed as the input of the matching forward convolution
        let geometry = Geometry::new(self.out_channels, ho, wo, self.kernel, self.stride, self.pad)
            .filter(|g| g.out_height == h && g.out_width == w)
            .ok_or_else(|| shape_mismatch("invertible deconvolution geometry", x.dim()))?;
        let x_cm = nchw_to_cm(&contiguous(x));
        let pos = h * w;
        let mut cols = Array2::zeros((geometry.rows(), b * pos));
        general_mat_mul(T::one(), &self.weight_matrix().t(), &x_cm, T::zero(), &mut cols);
        let mut y = Array4::zeros((b, self.out_channels, ho, wo));
        {
            let plane = self.out_channels * ho * wo;
            let dst = y.as_slice_mut().expect("contiguous");
            let src = cols.as_slice().expect("contiguous");
            for bi in 0..b {
                geometry.col2im(src, b * pos, bi * pos, &mut dst[bi * plane..(bi + 1) * plane]);
            }
        }
        for mut img in y.axis_iter_mut(Axis(0)) {
            for (mut ch, &bias) in img.axis_iter_mut(Axis(0)).zip(self.bias.value.iter()) {
                ch.mapv_inplace(|v| v + bias);
            }
        }
        Ok((y, DeconvCache { geometry, batch: b, x_cm }))
    }

    pub fn backward(&mut self, cache: &DeconvCache<T>, dy: &Array4<T>) -> Array4<T> {
        let g = cache.geometry;
        let b = cache.batch;
        let dy = contiguous(dy);
        let pos = g.positions();
        let mut dcols = Array2::zeros((g.rows(), b * pos));
        {
            let src = dy.as_slice().expect("contiguous");
            let plane = g.channels * g.height * g.width;
            let dst = dcols.as_slice_mut().expect("contiguous");
            for bi in 0..b {
                g.im2col(&src[bi * plane..(bi + 1) * plane], dst, b * pos, bi * pos);
            }
        }
        {
            let cols = self.out_channels * self.kernel * self.kernel;
            let mut dw = self
                .weight
                .grad
                .view_mut()
                .into_shape_with_order((self.in_channels, cols))
                .expect("grad is contiguous");
            general_mat_mul(T::one(), &cache.x_cm, &dcols.t(), T::one(), &mut dw);
        }
        for (co, gb) in self.bias.grad.iter_mut().enumerate() {
            *gb = *gb + dy.index_axis(Axis(1), co).sum();
        }
        let mut dx_cm = Array2::zeros((self.in_channels, b * pos));
        general_mat_mul(T::one(), &self.weight_matrix(), &dcols, T::zero(), &mut dx_cm);
        cm_to_nchw(&dx_cm, b, g.out_height, g.out_width)
    }
}

impl<T: Scalar> Parameterized<T> for ConvTranspose2d<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}
