//! Layer kernels on `C x H x W` tensors.

use alloc::vec;
use alloc::vec::Vec;

use super::arch::{Activation, ConvLayerSpec};
use super::Real;
use crate::error::{Error, Result};

/// Dense row-major `channels x height x width` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::LengthMismatch {
                what: "tensor data",
                expected: channels * height * width,
                actual: data.len(),
            });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}

/// Upper bound on the elements of one im2col chunk.
const COL_BUDGET: usize = 1 << 21;

struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    pad_top: usize,
    pad_left: usize,
    out_h: usize,
}

impl Geometry {
    fn new(spec: &ConvLayerSpec, input: (usize, usize, usize)) -> Result<Self> {
        let (c_in, h, w) = input;
        if c_in != spec.in_channels {
            return Err(Error::ShapeMismatch {
                what: "conv input channels",
                expected: (spec.in_channels, h, w),
                actual: input,
            });
        }
        let (kh, kw) = spec.kernel;
        let out_h = spec.output_height(h).ok_or(Error::ShapeMismatch {
            what: "conv input height (valid kernel taller than input)",
            expected: (c_in, kh, w),
            actual: input,
        })?;
        Ok(Self {
            c_in,
            h,
            w,
            kh,
            kw,
            pad_top: spec.pad_top(),
            pad_left: (kw - 1) / 2,
            out_h,
        })
    }

    fn k(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn rows_per_chunk(&self) -> usize {
        (COL_BUDGET / (self.k() * self.w).max(1)).clamp(1, self.out_h)
    }

    /// Patch matrix `K x ((r1 - r0) W)` for output rows `r0..r1`.
    fn im2col<T: Real>(&self, x: &[T], r0: usize, r1: usize, col: &mut Vec<T>) {
        let p = (r1 - r0) * self.w;
        col.clear();
        col.resize(self.k() * p, T::zero());
        for c in 0..self.c_in {
            let plane = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = &mut col[((c * self.kh + i) * self.kw + j) * p..][..p];
                    for y in r0..r1 {
                        let sy = y + i;
                        if sy < self.pad_top || sy - self.pad_top >= self.h {
                            continue;
                        }
                        let src = &plane[(sy - self.pad_top) * self.w..][..self.w];
                        let dst = &mut row[(y - r0) * self.w..][..self.w];
                        // dst[x] = src[x + j - pad_left]
                        let (lo, hi) = self.cols(j);
                        if lo < hi {
                            dst[lo..hi].copy_from_slice(&src[lo + j - self.pad_left..hi + j - self.pad_left]);
                        }
                    }
                }
            }
        }
    }

    /// Adds a patch-gradient matrix back onto the input gradient.
    fn col2im<T: Real>(&self, col: &[T], r0: usize, r1: usize, dx: &mut [T]) {
        let p = (r1 - r0) * self.w;
        for c in 0..self.c_in {
            let plane = &mut dx[c * self.h * self.w..(c + 1) * self.h * self.w];
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = &col[((c * self.kh + i) * self.kw + j) * p..][..p];
                    for y in r0..r1 {
                        let sy = y + i;
                        if sy < self.pad_top || sy - self.pad_top >= self.h {
                            continue;
                        }
                        let dst = &mut plane[(sy - self.pad_top) * self.w..][..self.w];
                        let src = &row[(y - r0) * self.w..][..self.w];
                        let (lo, hi) = self.cols(j);
                        for x in lo..hi {
                            dst[x + j - self.pad_left] += src[x];
                        }
                    }
                }
            }
        }
    }
}

fn axpy<T: Real>(dst: &mut [T], a: T, src: &[T]) {
    for (d, &v) in dst.iter_mut().zip(src) {
        *d += a * v;
    }
}

/// `dst[x] += sum_j k[j] src[x + j - pad]` over one row, zero outside `src`.
fn correlate_row<T: Real>(dst: &mut [T], src: &[T], k: &[T]) {
    let w = dst.len();
    let kw = k.len();
    let pad = (kw - 1) / 2;
    if kw == 5 && w >= 5 {
        let n = w - 4;
        let (k0, k1, k2, k3, k4) = (k[0], k[1], k[2], k[3], k[4]);
        let d = &mut dst[2..2 + n];
        let (s0, s1, s2, s3, s4) = (&src[..n], &src[1..n + 1], &src[2..n + 2], &src[3..n + 3], &src[4..n + 4]);
        for (x, d) in d.iter_mut().enumerate() {
            *d += k0 * s0[x] + k1 * s1[x] + k2 * s2[x] + k3 * s3[x] + k4 * s4[x];
        }
        for x in (0..2).chain(w - 2..w) {
            for (j, &kj) in k.iter().enumerate() {
                if let Some(&v) = (x + j).checked_sub(pad).and_then(|sx| src.get(sx)) {
                    dst[x] += kj * v;
                }
            }
        }
        return;
    }
    for (j, &kj) in k.iter().enumerate() {
        let lo = pad.saturating_sub(j);
        let hi = (w + pad).saturating_sub(j).min(w);
        if lo < hi {
            axpy(&mut dst[lo..hi], kj, &src[lo + j - pad..hi + j - pad]);
        }
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let (ac, bc) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: T = ac.remainder().iter().zip(bc.remainder()).map(|(&x, &y)| x * y).sum();
    for (x, y) in ac.zip(bc) {
        for k in 0..8 {
            lanes[k] += x[k] * y[k];
        }
    }
    lanes.iter().copied().sum::<T>() + tail
}

impl Geometry {
    /// Valid output columns `lo..hi` for kernel column `j`; the matching
    /// input columns are shifted by `j - pad_left`.
    fn cols(&self, j: usize) -> (usize, usize) {
        (
            self.pad_left.saturating_sub(j),
            (self.w + self.pad_left).saturating_sub(j).min(self.w),
        )
    }

    /// Input row feeding output row `y` through kernel row `i`.
    fn src_row(&self, y: usize, i: usize) -> Option<usize> {
        let sy = y + i;
        (sy >= self.pad_top && sy - self.pad_top < self.h).then(|| sy - self.pad_top)
    }

    fn widx(&self, co: usize, ci: usize, i: usize, j: usize) -> usize {
        ((co * self.c_in + ci) * self.kh + i) * self.kw + j
    }

    fn direct_forward<T: Real>(&self, x: &[T], weights: &[T], out: &mut [T]) {
        let (plane_in, plane_out) = (self.h * self.w, self.out_h * self.w);
        for (co, o) in out.chunks_exact_mut(plane_out).enumerate() {
            for ci in 0..self.c_in {
                let xin = &x[ci * plane_in..][..plane_in];
                for i in 0..self.kh {
                    let k = &weights[self.widx(co, ci, i, 0)..][..self.kw];
                    for y in 0..self.out_h {
                        let Some(sy) = self.src_row(y, i) else { continue };
                        correlate_row(&mut o[y * self.w..][..self.w], &xin[sy * self.w..][..self.w], k);
                    }
                }
            }
        }
    }

    fn direct_weight_grad<T: Real>(&self, x: &[T], dz: &[T], dw: &mut [T], c_out: usize) {
        let (plane_in, plane_out) = (self.h * self.w, self.out_h * self.w);
        for co in 0..c_out {
            let g = &dz[co * plane_out..][..plane_out];
            for ci in 0..self.c_in {
                let xin = &x[ci * plane_in..][..plane_in];
                for i in 0..self.kh {
                    for j in 0..self.kw {
                        let (lo, hi) = self.cols(j);
                        if lo >= hi {
                            continue;
                        }
                        let mut acc = T::zero();
                        for y in 0..self.out_h {
                            let Some(sy) = self.src_row(y, i) else { continue };
                            let src = &xin[sy * self.w..][..self.w];
                            acc += dot(&g[y * self.w + lo..y * self.w + hi], &src[lo + j - self.pad_left..hi + j - self.pad_left]);
                        }
                        dw[self.widx(co, ci, i, j)] = acc;
                    }
                }
            }
        }
    }

    fn direct_input_grad<T: Real>(&self, weights: &[T], dz: &[T], dx: &mut [T], c_out: usize) {
        let (plane_in, plane_out) = (self.h * self.w, self.out_h * self.w);
        for ci in 0..self.c_in {
            let din = &mut dx[ci * plane_in..][..plane_in];
            for co in 0..c_out {
                let g = &dz[co * plane_out..][..plane_out];
                for i in 0..self.kh {
                    // the adjoint of a row correlation is a correlation with the flipped kernel
                    let mut k: Vec<T> = weights[self.widx(co, ci, i, 0)..][..self.kw].to_vec();
                    k.reverse();
                    for y in 0..self.out_h {
                        let Some(sy) = self.src_row(y, i) else { continue };
                        correlate_row(&mut din[sy * self.w..][..self.w], &g[y * self.w..][..self.w], &k);
                    }
                }
            }
        }
    }
}

/// How a conv layer is lowered onto loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvStrategy {
    /// Direct for thin layers, im2col + GEMM otherwise.
    Auto,
    /// Row-wise shifted multiply-adds.
    Direct,
    /// Patch matrix and matrix multiply, in row chunks.
    Im2col,
}

/// Largest `c_in * c_out` handled directly under [`ConvStrategy::Auto`].
const DIRECT_LIMIT: usize = 256;

impl ConvStrategy {
    fn direct(self, spec: &ConvLayerSpec) -> bool {
        match self {
            ConvStrategy::Auto => spec.in_channels * spec.out_channels <= DIRECT_LIMIT,
            ConvStrategy::Direct => true,
            ConvStrategy::Im2col => false,
        }
    }
}

fn check_params<T>(spec: &ConvLayerSpec, weights: &[T], bias: &[T]) -> Result<()> {
    if weights.len() != spec.weight_count() {
        return Err(Error::LengthMismatch {
            what: "conv weights",
            expected: spec.weight_count(),
            actual: weights.len(),
        });
    }
    if bias.len() != spec.out_channels {
        return Err(Error::LengthMismatch {
            what: "conv bias",
            expected: spec.out_channels,
            actual: bias.len(),
        });
    }
    Ok(())
}

/// Stride-1 cross-correlation, horizontally same-padded, followed by the
/// layer's activation. Weights are `[out][in][kh][kw]`.
pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    spec: &ConvLayerSpec,
    weights: &[T],
    bias: &[T],
) -> Result<Tensor<T>> {
    conv2d_forward_with(input, spec, weights, bias, ConvStrategy::Auto)
}

pub fn conv2d_forward_with<T: Real>(
    input: &Tensor<T>,
    spec: &ConvLayerSpec,
    weights: &[T],
    bias: &[T],
    strategy: ConvStrategy,
) -> Result<Tensor<T>> {
    let g = Geometry::new(spec, input.shape())?;
    check_params(spec, weights, bias)?;
    let c_out = spec.out_channels;
    let plane = g.out_h * g.w;
    let mut out = Tensor::zeros(c_out, g.out_h, g.w);
    for (co, &b) in bias.iter().enumerate() {
        out.data[co * plane..(co + 1) * plane].fill(b);
    }
    if strategy.direct(spec) {
        g.direct_forward(&input.data, weights, &mut out.data);
        if spec.activation == Activation::Relu {
            relu_in_place(&mut out.data);
        }
        return Ok(out);
    }
    let k = g.k();
    let step = g.rows_per_chunk();
    let mut col = Vec::new();
    let mut r0 = 0;
    while r0 < g.out_h {
        let r1 = (r0 + step).min(g.out_h);
        let p = (r1 - r0) * g.w;
        g.im2col(&input.data, r0, r1, &mut col);
        T::gemm(
            c_out,
            k,
            p,
            T::one(),
            weights,
            k as isize,
            1,
            &col,
            p as isize,
            1,
            T::one(),
            &mut out.data[r0 * g.w..],
            plane as isize,
            1,
        );
        r0 = r1;
    }
    if spec.activation == Activation::Relu {
        relu_in_place(&mut out.data);
    }
    Ok(out)
}

/// Parameter and input gradients of one conv layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    /// `None` when not requested.
    pub input: Option<Tensor<T>>,
}

/// Reverse pass of [`conv2d_forward`]. `output` is the (post-activation)
/// forward result, used for the ReLU mask.
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    output: &Tensor<T>,
    spec: &ConvLayerSpec,
    weights: &[T],
    grad_output: &Tensor<T>,
    need_input_grad: bool,
) -> Result<ConvGrads<T>> {
    conv2d_backward_with(input, output, spec, weights, grad_output, need_input_grad, ConvStrategy::Auto)
}

pub fn conv2d_backward_with<T: Real>(
    input: &Tensor<T>,
    output: &Tensor<T>,
    spec: &ConvLayerSpec,
    weights: &[T],
    grad_output: &Tensor<T>,
    need_input_grad: bool,
    strategy: ConvStrategy,
) -> Result<ConvGrads<T>> {
    let g = Geometry::new(spec, input.shape())?;
    let expected = (spec.out_channels, g.out_h, g.w);
    for (what, t) in [("conv output", output), ("conv output gradient", grad_output)] {
        if t.shape() != expected {
            return Err(Error::ShapeMismatch {
                what,
                expected,
                actual: t.shape(),
            });
        }
    }
    if weights.len() != spec.weight_count() {
        return Err(Error::LengthMismatch {
            what: "conv weights",
            expected: spec.weight_count(),
            actual: weights.len(),
        });
    }
    let dz = match spec.activation {
        Activation::Relu => relu_backward(&output.data, &grad_output.data),
        Activation::None => grad_output.data.clone(),
    };
    let c_out = spec.out_channels;
    let plane = g.out_h * g.w;
    let k = g.k();
    let bias: Vec<T> = (0..c_out)
        .map(|co| dz[co * plane..(co + 1) * plane].iter().copied().sum())
        .collect();
    let mut dw = vec![T::zero(); c_out * k];
    let mut dx = need_input_grad.then(|| Tensor::zeros(g.c_in, g.h, g.w));
    if strategy.direct(spec) {
        g.direct_weight_grad(&input.data, &dz, &mut dw, c_out);
        if let Some(dx) = dx.as_mut() {
            g.direct_input_grad(weights, &dz, &mut dx.data, c_out);
        }
        return Ok(ConvGrads {
            weights: dw,
            bias,
            input: dx,
        });
    }
    let step = g.rows_per_chunk();
    let mut col = Vec::new();
    let mut dcol = Vec::new();
    let mut r0 = 0;
    while r0 < g.out_h {
        let r1 = (r0 + step).min(g.out_h);
        let p = (r1 - r0) * g.w;
        let dz_chunk = &dz[r0 * g.w..];
        g.im2col(&input.data, r0, r1, &mut col);
        // dW += dZ (c_out x p) . col^T (p x k)
        T::gemm(
            c_out,
            p,
            k,
            T::one(),
            dz_chunk,
            plane as isize,
            1,
            &col,
            1,
            p as isize,
            T::one(),
            &mut dw,
            k as isize,
            1,
        );
        if let Some(dx) = dx.as_mut() {
            // dcol = W^T (k x c_out) . dZ (c_out x p)
            dcol.clear();
            dcol.resize(k * p, T::zero());
            T::gemm(
                k,
                c_out,
                p,
                T::one(),
                weights,
                1,
                k as isize,
                dz_chunk,
                plane as isize,
                1,
                T::zero(),
                &mut dcol,
                p as isize,
                1,
            );
            g.col2im(&dcol, r0, r1, &mut dx.data);
        }
        r0 = r1;
    }
    Ok(ConvGrads {
        weights: dw,
        bias,
        input: dx,
    })
}

fn relu_in_place<T: Real>(x: &mut [T]) {
    for v in x {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
}

pub fn relu_forward<T: Real>(x: &[T]) -> Vec<T> {
    let mut out = x.to_vec();
    relu_in_place(&mut out);
    out
}

/// Passes the upstream gradient where the forward output was positive.
pub fn relu_backward<T: Real>(output: &[T], grad_output: &[T]) -> Vec<T> {
    output
        .iter()
        .zip(grad_output)
        .map(|(&y, &g)| if y > T::zero() { g } else { T::zero() })
        .collect()
}

/// Vertical 2x1 max-pool. Odd heights get one zero row appended first.
/// The selector is 0 for the upper row of each pair, 1 for the lower (or
/// padded) row; ties pick the upper row.
pub fn maxpool_2x1_forward<T: Real>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<u8>)> {
    let (c, h, w) = input.shape();
    if h == 0 {
        return Err(Error::ShapeMismatch {
            what: "pool input",
            expected: (c, 1, w),
            actual: input.shape(),
        });
    }
    let oh = h.div_ceil(2);
    let mut out = Tensor::zeros(c, oh, w);
    let mut sel = vec![0u8; c * oh * w];
    for ch in 0..c {
        let x = input.plane(ch);
        for i in 0..oh {
            let top = &x[2 * i * w..][..w];
            let bottom = (2 * i + 1 < h).then(|| &x[(2 * i + 1) * w..][..w]);
            let o = (ch * oh + i) * w;
            for col in 0..w {
                let b = bottom.map_or(T::zero(), |r| r[col]);
                if b > top[col] {
                    out.data[o + col] = b;
                    sel[o + col] = 1;
                } else {
                    out.data[o + col] = top[col];
                }
            }
        }
    }
    Ok((out, sel))
}

/// Routes each output gradient to the selected input row; gradients routed
/// to a padding row are dropped.
pub fn maxpool_2x1_backward<T: Real>(
    input_shape: (usize, usize, usize),
    selector: &[u8],
    grad_output: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (c, h, w) = input_shape;
    let oh = h.div_ceil(2);
    if grad_output.shape() != (c, oh, w) || selector.len() != c * oh * w {
        return Err(Error::ShapeMismatch {
            what: "pool output gradient",
            expected: (c, oh, w),
            actual: grad_output.shape(),
        });
    }
    let mut dx = Tensor::zeros(c, h, w);
    for ch in 0..c {
        for i in 0..oh {
            for col in 0..w {
                let o = (ch * oh + i) * w + col;
                let row = 2 * i + selector[o] as usize;
                if row < h {
                    dx.data[(ch * h + row) * w + col] += grad_output.data[o];
                }
            }
        }
    }
    Ok(dx)
}

/// Mean squared error and its gradient `2 (pred - target) / n`.
pub fn mse<T: Real>(pred: &[T], target: &[T]) -> Result<(T, Vec<T>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::LengthMismatch {
            what: "mse target",
            expected: pred.len(),
            actual: target.len(),
        });
    }
    let n = T::of(pred.len() as f64);
    let mut loss = T::zero();
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            loss += d * d;
            T::of(2.0) * d / n
        })
        .collect();
    Ok((loss / n, grad))
}
