//! Forward and backward kernels on plain tensors.
//!
//! Every image-like tensor is a single sample laid out `C×h×w`. The autodiff
//! [`Tape`](super::Tape) wraps these kernels; they are also usable directly.

use serde::{Deserialize, Serialize};

use super::scalar::gemm;
use super::{Scalar, Tensor};
use crate::error::{shape_err, Result};

/// Geometry of a 2-D convolution. Kernels are square.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: usize,
    pub dilation: usize,
    pub groups: usize,
    pub padding: usize,
}

impl Default for ConvGeom {
    fn default() -> Self {
        Self {
            stride: 1,
            dilation: 1,
            groups: 1,
            padding: 0,
        }
    }
}

impl ConvGeom {
    /// Stride-1 geometry that keeps `h×w` for an odd kernel size `k`.
    pub fn same(k: usize, dilation: usize) -> Self {
        Self {
            dilation,
            padding: dilation * (k - 1) / 2,
            ..Self::default()
        }
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn out_len(&self, n: usize, k: usize) -> Option<usize> {
        let span = self.dilation * (k - 1) + 1;
        let padded = n + 2 * self.padding;
        if self.stride == 0 || padded < span {
            return None;
        }
        Some((padded - span) / self.stride + 1)
    }
}

struct ConvShape {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    cpg: usize,
    opg: usize,
    k: usize,
    oh: usize,
    ow: usize,
}

impl ConvShape {
    fn resolve<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, g: ConvGeom) -> Result<Self> {
        let (c_in, h, wd) = x.chw("conv2d")?;
        let [c_out, cpg, kh, kw] = w.dims()[..] else {
            return shape_err("conv2d", format!("weight must be 4-D, got {:?}", w.dims()));
        };
        if g.groups == 0 || c_in % g.groups != 0 || c_out % g.groups != 0 {
            return shape_err(
                "conv2d",
                format!(
                    "channel axis: C_in={c_in}, C_out={c_out} not divisible by groups={}",
                    g.groups
                ),
            );
        }
        if cpg != c_in / g.groups {
            return shape_err(
                "conv2d",
                format!(
                    "channel axis: weight expects {cpg} input channels per group, input has {}",
                    c_in / g.groups
                ),
            );
        }
        if kh != kw {
            return shape_err("conv2d", format!("kernel axes differ: {kh}×{kw}"));
        }
        let oh = g
            .out_len(h, kh)
            .ok_or_else(|| crate::Error::Shape {
                op: "conv2d",
                msg: format!("height axis: {h} too small for kernel {kh}"),
            })?;
        let ow = g
            .out_len(wd, kw)
            .ok_or_else(|| crate::Error::Shape {
                op: "conv2d",
                msg: format!("width axis: {wd} too small for kernel {kw}"),
            })?;
        Ok(Self {
            c_in,
            h,
            w: wd,
            c_out,
            cpg,
            opg: c_out / g.groups,
            k: kh,
            oh,
            ow,
        })
    }

    fn is_pointwise(&self, g: ConvGeom) -> bool {
        self.k == 1 && g.stride == 1 && g.padding == 0
    }
}

/// Unrolls channels `c0..c0+cpg` into a `(cpg·k·k) × (oh·ow)` patch matrix.
fn im2col<T: Scalar>(x: &[T], s: &ConvShape, g: ConvGeom, c0: usize, cols: &mut [T]) {
    let p = s.oh * s.ow;
    let pad = g.padding as isize;
    for ci in 0..s.cpg {
        let plane = &x[(c0 + ci) * s.h * s.w..(c0 + ci + 1) * s.h * s.w];
        for ky in 0..s.k {
            for kx in 0..s.k {
                let row = (ci * s.k + ky) * s.k + kx;
                let out = &mut cols[row * p..(row + 1) * p];
                for oy in 0..s.oh {
                    let iy = (oy * g.stride + ky * g.dilation) as isize - pad;
                    let dst = &mut out[oy * s.ow..(oy + 1) * s.ow];
                    if iy < 0 || iy >= s.h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * s.w..(iy as usize + 1) * s.w];
                    let off = (kx * g.dilation) as isize - pad;
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.stride) as isize + off;
                        *d = if ix < 0 || ix >= s.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-adds a patch matrix back onto channels `c0..c0+cpg` of `dx`.
fn col2im<T: Scalar>(cols: &[T], s: &ConvShape, g: ConvGeom, c0: usize, dx: &mut [T]) {
    let p = s.oh * s.ow;
    let pad = g.padding as isize;
    for ci in 0..s.cpg {
        let plane = &mut dx[(c0 + ci) * s.h * s.w..(c0 + ci + 1) * s.h * s.w];
        for ky in 0..s.k {
            for kx in 0..s.k {
                let row = (ci * s.k + ky) * s.k + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..s.oh {
                    let iy = (oy * g.stride + ky * g.dilation) as isize - pad;
                    if iy < 0 || iy >= s.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * s.w..(iy as usize + 1) * s.w];
                    let off = (kx * g.dilation) as isize - pad;
                    for ox in 0..s.ow {
                        let ix = (ox * g.stride) as isize + off;
                        if ix >= 0 && ix < s.w as isize {
                            dst[ix as usize] = dst[ix as usize] + src[oy * s.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// 2-D cross-correlation of a `C_in×h×w` input with a `C_out×(C_in/groups)×k×k` kernel.
pub fn conv2d<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
    g: ConvGeom,
) -> Result<Tensor<T>> {
    let s = ConvShape::resolve(x, w, g)?;
    if let Some(b) = b {
        if b.dims() != [s.c_out] {
            return shape_err(
                "conv2d",
                format!("bias must be [{}], got {:?}", s.c_out, b.dims()),
            );
        }
    }
    let p = s.oh * s.ow;
    let kk = s.cpg * s.k * s.k;
    let mut out = vec![T::zero(); s.c_out * p];
    let pointwise = s.is_pointwise(g);
    let mut cols = if pointwise {
        Vec::new()
    } else {
        vec![T::zero(); kk * p]
    };
    for grp in 0..g.groups {
        let wg = &w.data()[grp * s.opg * kk..(grp + 1) * s.opg * kk];
        let og = &mut out[grp * s.opg * p..(grp + 1) * s.opg * p];
        if pointwise {
            let xs = &x.data()[grp * s.cpg * p..(grp + 1) * s.cpg * p];
            gemm(false, false, s.opg, p, kk, wg, xs, T::zero(), og);
        } else {
            im2col(x.data(), &s, g, grp * s.cpg, &mut cols);
            gemm(false, false, s.opg, p, kk, wg, &cols, T::zero(), og);
        }
    }
    if let Some(b) = b {
        for (c, &bv) in b.data().iter().enumerate() {
            out[c * p..(c + 1) * p].iter_mut().for_each(|v| *v = *v + bv);
        }
    }
    Tensor::new(vec![s.c_out, s.oh, s.ow], out)
}

pub struct ConvGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients of [`conv2d`] given the upstream gradient `dy`.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    g: ConvGeom,
    dy: &Tensor<T>,
    need_input: bool,
) -> Result<ConvGrads<T>> {
    let s = ConvShape::resolve(x, w, g)?;
    if dy.dims() != [s.c_out, s.oh, s.ow] {
        return shape_err(
            "conv2d_backward",
            format!(
                "upstream gradient {:?} != output [{}, {}, {}]",
                dy.dims(),
                s.c_out,
                s.oh,
                s.ow
            ),
        );
    }
    let p = s.oh * s.ow;
    let kk = s.cpg * s.k * s.k;
    let bias: Vec<T> = (0..s.c_out)
        .map(|c| dy.data()[c * p..(c + 1) * p].iter().copied().sum())
        .collect();
    let mut dw = vec![T::zero(); w.numel()];
    let mut dx = need_input.then(|| vec![T::zero(); x.numel()]);
    let pointwise = s.is_pointwise(g);
    let mut cols = if pointwise {
        Vec::new()
    } else {
        vec![T::zero(); kk * p]
    };
    for grp in 0..g.groups {
        let dyg = &dy.data()[grp * s.opg * p..(grp + 1) * s.opg * p];
        let wg = &w.data()[grp * s.opg * kk..(grp + 1) * s.opg * kk];
        let dwg = &mut dw[grp * s.opg * kk..(grp + 1) * s.opg * kk];
        if pointwise {
            let xs = &x.data()[grp * s.cpg * p..(grp + 1) * s.cpg * p];
            gemm(false, true, s.opg, kk, p, dyg, xs, T::zero(), dwg);
            if let Some(dx) = dx.as_mut() {
                let dxs = &mut dx[grp * s.cpg * p..(grp + 1) * s.cpg * p];
                gemm(true, false, kk, p, s.opg, wg, dyg, T::zero(), dxs);
            }
        } else {
            im2col(x.data(), &s, g, grp * s.cpg, &mut cols);
            gemm(false, true, s.opg, kk, p, dyg, &cols, T::zero(), dwg);
            if let Some(dx) = dx.as_mut() {
                gemm(true, false, kk, p, s.opg, wg, dyg, T::zero(), &mut cols);
                col2im(&cols, &s, g, grp * s.cpg, dx);
            }
        }
    }
    Ok(ConvGrads {
        input: dx
            .map(|d| Tensor::new(vec![s.c_in, s.h, s.w], d))
            .transpose()?,
        weight: Tensor::new(w.dims().to_vec(), dw)?,
        bias: Tensor::new(vec![s.c_out], bias)?,
    })
}

/// Pointwise nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    /// Exact `x·Φ(x)` with `Φ` the standard normal CDF.
    Gelu,
    Sigmoid,
}

fn normal_cdf<T: Scalar>(x: T) -> T {
    T::lit(0.5) * (T::one() + (x * T::lit(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

fn normal_pdf<T: Scalar>(x: T) -> T {
    T::lit(0.398_942_280_401_432_7) * (-(x * x) * T::lit(0.5)).exp()
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    #[inline]
    pub fn eval<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Gelu => x * normal_cdf(x),
            Activation::Sigmoid => T::one() / (T::one() + (-x).exp()),
        }
    }

    /// Derivative at input `x` given the forward output `y`.
    #[inline]
    pub fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Gelu => normal_cdf(x) + x * normal_pdf(x),
            Activation::Sigmoid => y * (T::one() - y),
        }
    }
}

pub fn activation<T: Scalar>(kind: Activation, x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| kind.eval(v))
}

pub fn activation_backward<T: Scalar>(
    kind: Activation,
    x: &Tensor<T>,
    y: &Tensor<T>,
    dy: &Tensor<T>,
) -> Tensor<T> {
    Tensor::from_fn(x.dims().to_vec(), |i| {
        dy.data()[i] * kind.derivative(x.data()[i], y.data()[i])
    })
}

fn split_axis(dims: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = dims[..axis].iter().product();
    let inner = dims[axis + 1..].iter().product();
    (outer, dims[axis], inner)
}

/// Softmax along `axis`, stabilised by subtracting the slice maximum.
pub fn softmax<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    if axis >= x.ndim() {
        return shape_err("softmax", format!("axis {axis} out of range for {:?}", x.dims()));
    }
    let (outer, n, inner) = split_axis(x.dims(), axis);
    let mut out = x.clone();
    let d = out.data_mut();
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * n + j) * inner + i;
            let mx = (0..n).fold(T::neg_infinity(), |m, j| m.max(d[at(j)]));
            let mut total = T::zero();
            for j in 0..n {
                let e = (d[at(j)] - mx).exp();
                d[at(j)] = e;
                total = total + e;
            }
            for j in 0..n {
                d[at(j)] = d[at(j)] / total;
            }
        }
    }
    Ok(out)
}

pub fn softmax_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>, axis: usize) -> Tensor<T> {
    let (outer, n, inner) = split_axis(y.dims(), axis);
    let mut dx = Tensor::zeros(y.dims().to_vec());
    let (yd, gd) = (y.data(), dy.data());
    let out = dx.data_mut();
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * n + j) * inner + i;
            let dot: T = (0..n).map(|j| yd[at(j)] * gd[at(j)]).sum();
            for j in 0..n {
                out[at(j)] = yd[at(j)] * (gd[at(j)] - dot);
            }
        }
    }
    dx
}

/// Per-channel spatial mean: `C×h×w → C`.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = x.chw("global_avg_pool")?;
    if h == 0 || w == 0 {
        return shape_err("global_avg_pool", "empty spatial extent");
    }
    let inv = T::one() / T::lit((h * w) as f64);
    Tensor::new(
        vec![c],
        (0..c).map(|ch| x.channel(ch).iter().copied().sum::<T>() * inv).collect(),
    )
}

pub fn global_avg_pool_backward<T: Scalar>(dims: &[usize], dy: &Tensor<T>) -> Tensor<T> {
    let plane = dims[1] * dims[2];
    let inv = T::one() / T::lit(plane as f64);
    Tensor::from_fn(dims.to_vec(), |i| dy.data()[i / plane] * inv)
}

/// Pixel shuffle: `(C·r²)×h×w → C×(r·h)×(r·w)`, with
/// `out[c, r·i+dy, r·j+dx] = in[c·r² + dy·r + dx, i, j]`.
pub fn pixel_shuffle<T: Scalar>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let (c, h, w) = x.chw("pixel_shuffle")?;
    if r == 0 || c % (r * r) != 0 {
        return shape_err(
            "pixel_shuffle",
            format!("channel axis: {c} not divisible by {}", r * r),
        );
    }
    let oc = c / (r * r);
    let (oh, ow) = (h * r, w * r);
    let mut out = vec![T::zero(); x.numel()];
    for (ci, src) in x.data().chunks(h * w).enumerate() {
        let (o, sub) = (ci / (r * r), ci % (r * r));
        let (sy, sx) = (sub / r, sub % r);
        for i in 0..h {
            for j in 0..w {
                out[(o * oh + r * i + sy) * ow + r * j + sx] = src[i * w + j];
            }
        }
    }
    Tensor::new(vec![oc, oh, ow], out)
}

/// Inverse of [`pixel_shuffle`]: `C×(r·h)×(r·w) → (C·r²)×h×w`.
pub fn pixel_unshuffle<T: Scalar>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let (c, h, w) = x.chw("pixel_unshuffle")?;
    if r == 0 || h % r != 0 || w % r != 0 {
        return shape_err(
            "pixel_unshuffle",
            format!("spatial axes {h}×{w} not divisible by {r}"),
        );
    }
    let (oh, ow) = (h / r, w / r);
    let mut out = vec![T::zero(); x.numel()];
    for ch in 0..c {
        for sy in 0..r {
            for sx in 0..r {
                let o = ch * r * r + sy * r + sx;
                for i in 0..oh {
                    for j in 0..ow {
                        out[(o * oh + i) * ow + j] = x.data()[(ch * h + r * i + sy) * w + r * j + sx];
                    }
                }
            }
        }
    }
    Tensor::new(vec![c * r * r, oh, ow], out)
}

/// Spatial resampling modes used by the encoder/decoder.
pub enum Resample<'a, T> {
    /// Learnable stride-2 3×3 convolution (halves `h` and `w`).
    DownStride2 {
        weight: &'a Tensor<T>,
        bias: Option<&'a Tensor<T>>,
    },
    /// Parameter-free pixel shuffle by 2.
    UpShuffle2,
}

pub fn resample<T: Scalar>(x: &Tensor<T>, mode: Resample<'_, T>) -> Result<Tensor<T>> {
    match mode {
        Resample::DownStride2 { weight, bias } => conv2d(
            x,
            weight,
            bias,
            ConvGeom {
                stride: 2,
                padding: 1,
                ..ConvGeom::default()
            },
        ),
        Resample::UpShuffle2 => pixel_shuffle(x, 2),
    }
}

/// Matrix product with optional transposition of either operand.
pub fn matmul_t<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, ta: bool, tb: bool) -> Result<Tensor<T>> {
    let (ar, ac) = a.rc("matmul")?;
    let (br, bc) = b.rc("matmul")?;
    let (m, k1) = if ta { (ac, ar) } else { (ar, ac) };
    let (k2, n) = if tb { (bc, br) } else { (br, bc) };
    if k1 != k2 {
        return shape_err(
            "matmul",
            format!("inner dims differ: {:?}{} · {:?}{}", a.dims(), if ta { "ᵀ" } else { "" }, b.dims(), if tb { "ᵀ" } else { "" }),
        );
    }
    let mut out = vec![T::zero(); m * n];
    gemm(ta, tb, m, n, k1, a.data(), b.data(), T::zero(), &mut out);
    Tensor::new(vec![m, n], out)
}

/// Plain matrix product `m×k · k×n → m×n`.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    matmul_t(a, b, false, false)
}

/// Reflection index for any (possibly far out-of-range) coordinate.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Reflect-pads the bottom and right edges of a `C×h×w` tensor.
pub fn pad_reflect<T: Scalar>(x: &Tensor<T>, bottom: usize, right: usize) -> Result<Tensor<T>> {
    let (c, h, w) = x.chw("pad_reflect")?;
    let (oh, ow) = (h + bottom, w + right);
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let plane = x.channel(ch);
        for i in 0..oh {
            let si = reflect_index(i as isize, h);
            for j in 0..ow {
                out.push(plane[si * w + reflect_index(j as isize, w)]);
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

pub fn pad_reflect_backward<T: Scalar>(dims: &[usize], dy: &Tensor<T>) -> Tensor<T> {
    let (c, h, w) = (dims[0], dims[1], dims[2]);
    let (oh, ow) = (dy.dims()[1], dy.dims()[2]);
    let mut dx = Tensor::zeros(dims.to_vec());
    for ch in 0..c {
        let src = dy.channel(ch);
        let dst = dx.channel_mut(ch);
        for i in 0..oh {
            let si = reflect_index(i as isize, h);
            for j in 0..ow {
                let k = si * w + reflect_index(j as isize, w);
                dst[k] = dst[k] + src[i * ow + j];
            }
        }
    }
    dx
}

/// Top-left `h×w` window of a `C×H×W` tensor.
pub fn crop<T: Scalar>(x: &Tensor<T>, h: usize, w: usize) -> Result<Tensor<T>> {
    let (c, ih, iw) = x.chw("crop")?;
    if h > ih || w > iw {
        return shape_err("crop", format!("{h}×{w} exceeds {ih}×{iw}"));
    }
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        let plane = x.channel(ch);
        for i in 0..h {
            out.extend_from_slice(&plane[i * iw..i * iw + w]);
        }
    }
    Tensor::new(vec![c, h, w], out)
}

/// Row-wise layer normalisation of an `N×C` matrix, with affine `gamma`, `beta`.
pub fn layer_norm_rows<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    let (n, c) = x.rc("layer_norm")?;
    if gamma.dims() != [c] || beta.dims() != [c] {
        return shape_err("layer_norm", format!("affine params must be [{c}]"));
    }
    let mut out = vec![T::zero(); n * c];
    let eps = T::lit(eps);
    let inv_c = T::one() / T::lit(c as f64);
    for r in 0..n {
        let row = &x.data()[r * c..(r + 1) * c];
        let mean = row.iter().copied().sum::<T>() * inv_c;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_c;
        let inv_std = T::one() / (var + eps).sqrt();
        for j in 0..c {
            out[r * c + j] = (row[j] - mean) * inv_std * gamma.data()[j] + beta.data()[j];
        }
    }
    Tensor::new(vec![n, c], out)
}

/// Gradients `(dx, dgamma, dbeta)` of [`layer_norm_rows`].
pub fn layer_norm_rows_backward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    dy: &Tensor<T>,
    eps: f64,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (n, c) = (x.dims()[0], x.dims()[1]);
    let eps = T::lit(eps);
    let inv_c = T::one() / T::lit(c as f64);
    let mut dx = vec![T::zero(); n * c];
    let mut dg = vec![T::zero(); c];
    let mut db = vec![T::zero(); c];
    let mut xhat = vec![T::zero(); c];
    let mut dxhat = vec![T::zero(); c];
    for r in 0..n {
        let row = &x.data()[r * c..(r + 1) * c];
        let g = &dy.data()[r * c..(r + 1) * c];
        let mean = row.iter().copied().sum::<T>() * inv_c;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_c;
        let inv_std = T::one() / (var + eps).sqrt();
        for j in 0..c {
            xhat[j] = (row[j] - mean) * inv_std;
            dxhat[j] = g[j] * gamma.data()[j];
            dg[j] = dg[j] + g[j] * xhat[j];
            db[j] = db[j] + g[j];
        }
        let m1 = dxhat.iter().copied().sum::<T>() * inv_c;
        let m2 = dxhat.iter().zip(&xhat).map(|(&a, &b)| a * b).sum::<T>() * inv_c;
        for j in 0..c {
            dx[r * c + j] = inv_std * (dxhat[j] - m1 - xhat[j] * m2);
        }
    }
    (
        Tensor::new(vec![n, c], dx).unwrap(),
        Tensor::new(vec![c], dg).unwrap(),
        Tensor::new(vec![c], db).unwrap(),
    )
}
