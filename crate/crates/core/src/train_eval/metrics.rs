use crate::dataio::SrgbImage;
use crate::error::{shape_err, Result};
use crate::tensorkernels::{Scalar, Tensor};

/// `10·log10(peak² / MSE)`; identical inputs give `+∞`.
pub fn psnr<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, peak: f64) -> Result<f64> {
    a.expect_same_dims(b, "psnr")?;
    if a.numel() == 0 {
        return shape_err("psnr", "empty tensors");
    }
    let se: f64 = a.data().iter().zip(b.data()).map(|(&x, &y)| (x.f64() - y.f64()).powi(2)).sum();
    let mse = se / a.numel() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { 10.0 * (peak * peak / mse).log10() })
}

const WIN: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn gaussian_window() -> [f64; WIN] {
    let mut w = [0.0; WIN];
    let r = (WIN / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-((i as f64 - r).powi(2)) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable valid-mode filtering of an `h×w` plane.
fn filter_valid(x: &[f64], h: usize, w: usize, k: &[f64; WIN]) -> Vec<f64> {
    let (oh, ow) = (h - WIN + 1, w - WIN + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for j in 0..ow {
            rows[y * ow + j] = (0..WIN).map(|t| k[t] * x[y * w + j + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..WIN).map(|t| k[t] * rows[(i + t) * ow + j]).sum();
        }
    }
    out
}

/// Mean single-scale SSIM (11×11 Gaussian window, σ = 1.5, dynamic range 1)
/// over the valid positions of every channel of two `C×H×W` tensors.
pub fn ssim_tensor<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    a.expect_same_dims(b, "ssim")?;
    let (c, h, w) = a.chw("ssim")?;
    if h < WIN || w < WIN {
        return shape_err("ssim", format!("images must be at least {WIN}×{WIN}, got {h}×{w}"));
    }
    let k = gaussian_window();
    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..c {
        let x: Vec<f64> = a.channel(ch).iter().map(|v| v.f64()).collect();
        let y: Vec<f64> = b.channel(ch).iter().map(|v| v.f64()).collect();
        let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(u, v)| u * v).collect() };
        let mx = filter_valid(&x, h, w, &k);
        let my = filter_valid(&y, h, w, &k);
        let mxx = filter_valid(&prod(&x, &x), h, w, &k);
        let myy = filter_valid(&prod(&y, &y), h, w, &k);
        let mxy = filter_valid(&prod(&x, &y), h, w, &k);
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cxy = mxy[i] - ux * uy;
            total += ((2.0 * ux * uy + C1) * (2.0 * cxy + C2)) / ((ux * ux + uy * uy + C1) * (vx + vy + C2));
        }
        count += mx.len();
    }
    Ok(total / count as f64)
}

pub fn ssim(a: &SrgbImage, b: &SrgbImage) -> Result<f64> {
    ssim_tensor(a.tensor(), b.tensor())
}
