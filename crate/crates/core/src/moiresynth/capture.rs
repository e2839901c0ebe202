use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SynthParams;
use crate::dataio::RawMosaic;
use crate::error::{Error, Result};
use crate::tensorkernels::ops::reflect_index;
use crate::tensorkernels::Tensor;

/// Aperture subsamples per axis when integrating a pixel footprint.
const APERTURE_TAPS: usize = 4;

fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = k.iter().sum();
    k.iter().map(|v| (v / total) as f32).collect()
}

/// Separable Gaussian blur of every channel with reflected borders.
fn blur(x: &Tensor<f32>, sigma: f64) -> Tensor<f32> {
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let (c, h, w) = (x.dims()[0], x.dims()[1], x.dims()[2]);
    let mut tmp = Tensor::<f32>::zeros(vec![c, h, w]);
    let mut out = Tensor::<f32>::zeros(vec![c, h, w]);
    for ch in 0..c {
        let src = x.channel(ch);
        let mid = tmp.channel_mut(ch);
        for i in 0..h {
            for j in 0..w {
                mid[i * w + j] = kernel
                    .iter()
                    .enumerate()
                    .map(|(t, k)| k * src[i * w + reflect_index(j as isize + t as isize - r, w)])
                    .sum();
            }
        }
        let mid = tmp.channel(ch);
        let dst = out.channel_mut(ch);
        for i in 0..h {
            for j in 0..w {
                dst[i * w + j] = kernel
                    .iter()
                    .enumerate()
                    .map(|(t, k)| k * mid[reflect_index(i as isize + t as isize - r, h) * w + j])
                    .sum();
            }
        }
    }
    out
}

/// Bilinear lookup at fractional sample coordinates, clamped to the edge.
pub(super) fn bilinear(plane: &[f32], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let at = |i: usize, j: usize| plane[i * w + j] as f64;
    (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1))
}

/// Photographs a radiance field with a `height×width` RGGB sensor.
///
/// Each sensor pixel integrates `APERTURE_TAPS²` bilinear samples of the
/// blurred radiance over its light-sensitive square, mapped through the warp.
/// Sensor and radiance grids share their centers. Noise is drawn in raster
/// order from a generator seeded with `p.seed`.
pub fn camera_capture(radiance: &Tensor<f32>, p: &SynthParams, height: usize, width: usize) -> Result<RawMosaic> {
    p.validate()?;
    let (c, rh, rw) = radiance.chw("camera_capture")?;
    if c != 3 {
        return Err(Error::Synth(format!("radiance must have 3 channels, got {c}")));
    }
    let det = p.warp.det();
    if !det.is_finite() || det.abs() < 1e-9 {
        return Err(Error::Synth(format!("degenerate homography (det = {det:e})")));
    }
    let period = p.subpixel_period;
    let to_radiance = |x: f64, y: f64| -> Result<(f64, f64)> {
        let (u, v) = p
            .warp
            .project(x - width as f64 / 2.0, y - height as f64 / 2.0)
            .ok_or_else(|| Error::Synth("homography maps a sensor point to infinity".into()))?;
        Ok((v * period + rh as f64 / 2.0 - 0.5, u * period + rw as f64 / 2.0 - 0.5))
    };
    for (x, y) in [(0.0, 0.0), (width as f64, 0.0), (0.0, height as f64), (width as f64, height as f64)] {
        let (ry, rx) = to_radiance(x, y)?;
        let slack = period + 0.5;
        if ry < -slack || rx < -slack || ry > rh as f64 - 1.0 + slack || rx > rw as f64 - 1.0 + slack {
            return Err(Error::Synth(format!(
                "{height}×{width} sensor does not fit inside the {rh}×{rw} radiance field after warping"
            )));
        }
    }

    let field = if p.blur_sigma > 0.0 { blur(radiance, p.blur_sigma * period) } else { radiance.clone() };
    let response = p.camera_response()?;
    let planes = [field.channel(0), field.channel(1), field.channel(2)];
    let taps: Vec<f64> = (0..APERTURE_TAPS)
        .map(|t| ((t as f64 + 0.5) / APERTURE_TAPS as f64 - 0.5) * p.fill_factor)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut data = Vec::with_capacity(height * width);
    for i in 0..height {
        for j in 0..width {
            let row = response.0[RawMosaic::cfa_color(i, j)];
            let mut acc = 0.0;
            for &dy in &taps {
                for &dx in &taps {
                    let (ry, rx) = to_radiance(j as f64 + 0.5 + dx, i as f64 + 0.5 + dy)?;
                    for (k, plane) in planes.iter().enumerate() {
                        if row[k] != 0.0 {
                            acc += row[k] * bilinear(plane, rh, rw, ry, rx);
                        }
                    }
                }
            }
            let signal = p.exposure * acc / (taps.len() * taps.len()) as f64;
            let std = (p.noise_read * p.noise_read + p.noise_shot * signal.max(0.0)).sqrt();
            let n: f64 = StandardNormal.sample(&mut rng);
            data.push((signal + std * n).clamp(0.0, 1.0) as f32);
        }
    }
    RawMosaic::new(height, width, data)
}
