use super::SynthParams;
use crate::dataio::SrgbImage;
use crate::tensorkernels::Tensor;

/// One-hot stripe coverage of radiance column `u`: the R, G and B subpixels
/// each fill a third of a screen pixel, left to right.
pub fn stripe_mask(u: usize, period: f64) -> [f32; 3] {
    let phase = ((u as f64 + 0.5) / period).fract();
    let mut m = [0.0; 3];
    m[((phase * 3.0) as usize).min(2)] = 1.0;
    m
}

/// Renders an sRGB image on an RGB vertical-stripe screen.
///
/// Output is linear radiance of dims `3×⌈H·P⌉×⌈W·P⌉` with `P` the subpixel
/// period; each radiance sample carries only the channel of its subpixel.
pub fn simulate_screen(img: &SrgbImage, p: &SynthParams) -> Tensor<f32> {
    let period = p.subpixel_period;
    let (h, w) = img.dims();
    let (rh, rw) = ((h as f64 * period).ceil() as usize, (w as f64 * period).ceil() as usize);
    let src = img.tensor();
    let gamma = p.gamma as f32;
    let col_pixel: Vec<usize> = (0..rw).map(|u| (((u as f64 + 0.5) / period) as usize).min(w - 1)).collect();
    let col_mask: Vec<[f32; 3]> = (0..rw).map(|u| stripe_mask(u, period)).collect();
    let mut out = Tensor::zeros(vec![3, rh, rw]);
    for c in 0..3 {
        let plane = src.channel(c);
        let dst = out.channel_mut(c);
        for v in 0..rh {
            let y = (((v as f64 + 0.5) / period) as usize).min(h - 1);
            let row = &plane[y * w..(y + 1) * w];
            for u in 0..rw {
                if col_mask[u][c] > 0.0 {
                    dst[v * rw + u] = row[col_pixel[u]].powf(gamma);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex, FftPlanner};

    #[test]
    fn masks_partition_unity() {
        for period in [3.0, 3.5, 4.0, 7.25] {
            for u in 0..200 {
                assert_eq!(stripe_mask(u, period).iter().sum::<f32>(), 1.0);
            }
        }
    }

    #[test]
    fn black_input_gives_zero_radiance() {
        let img = SrgbImage::new(Tensor::zeros(vec![3, 4, 6])).unwrap();
        let r = simulate_screen(&img, &SynthParams::default());
        assert_eq!(r.dims(), &[3, 12, 18]);
        assert!(r.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gray_radiance_peaks_at_stripe_frequency() {
        for period in [3.0, 4.0, 5.5] {
            let mut p = SynthParams::default();
            p.subpixel_period = period;
            let img = SrgbImage::new(Tensor::full(vec![3, 2, 64], 0.5)).unwrap();
            let r = simulate_screen(&img, &p);
            let n = r.dims()[2];
            let mut row: Vec<Complex<f64>> =
                r.channel(0)[..n].iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
            let mean = row.iter().map(|c| c.re).sum::<f64>() / n as f64;
            row.iter_mut().for_each(|c| c.re -= mean);
            FftPlanner::new().plan_fft_forward(n).process(&mut row);
            let peak = (1..n / 2).max_by(|&a, &b| row[a].norm().total_cmp(&row[b].norm())).unwrap();
            let expected = n as f64 / period;
            assert!((peak as f64 - expected).abs() <= 1.0, "period {period}: peak bin {peak}, expected {expected}");
        }
    }
}
