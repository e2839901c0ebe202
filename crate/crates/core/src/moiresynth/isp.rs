use super::SynthParams;
use crate::dataio::{pack_rggb, unpack_rggb, PackedRaw, RawMosaic, SrgbImage};
use crate::error::Result;
use crate::tensorkernels::ops::reflect_index;
use crate::tensorkernels::Tensor;

/// Bilinear demosaic of an RGGB mosaic to `3×H×W` camera RGB.
///
/// Missing samples average their nearest same-color neighbours. Borders are
/// mirrored without repeating the edge, which keeps the Bayer phase.
pub fn demosaic_bilinear(m: &RawMosaic) -> Tensor<f32> {
    let (h, w) = (m.height(), m.width());
    let mut out = Tensor::zeros(vec![3, h, w]);
    for c in 0..3 {
        let dst = out.channel_mut(c);
        for i in 0..h {
            for j in 0..w {
                if RawMosaic::cfa_color(i, j) == c {
                    dst[i * w + j] = m.at(i, j);
                    continue;
                }
                let (mut acc, mut n) = (0.0f32, 0u32);
                for di in -1isize..=1 {
                    for dj in -1isize..=1 {
                        // Green neighbours sit on the cross; red and blue on the
                        // cross or the diagonals depending on the site.
                        if c == 1 && di != 0 && dj != 0 {
                            continue;
                        }
                        let y = reflect_index(i as isize + di, h);
                        let x = reflect_index(j as isize + dj, w);
                        if RawMosaic::cfa_color(y, x) == c {
                            acc += m.at(y, x);
                            n += 1;
                        }
                    }
                }
                dst[i * w + j] = acc / n as f32;
            }
        }
    }
    out
}

/// Demosaic, white balance and color correction, without clamping or gamma.
pub fn simple_isp_linear(raw: &PackedRaw, p: &SynthParams) -> Result<Tensor<f32>> {
    p.validate()?;
    let cam = demosaic_bilinear(&unpack_rggb(raw));
    let (h, w) = (cam.dims()[1], cam.dims()[2]);
    let mut out = Tensor::zeros(vec![3, h, w]);
    let g = p.wb_gains;
    for k in 0..h * w {
        let balanced = [0, 1, 2].map(|c| cam.channel(c)[k] as f64 * g[c]);
        let rgb = p.ccm.apply(balanced);
        for (c, v) in rgb.iter().enumerate() {
            out.channel_mut(c)[k] = *v as f32;
        }
    }
    Ok(out)
}

/// Develops packed RAW into sRGB: [`simple_isp_linear`], then `v^(1/γ)` and
/// clamping to `[0, 1]`.
pub fn simple_isp(raw: &PackedRaw, p: &SynthParams) -> Result<SrgbImage> {
    let inv_gamma = (1.0 / p.gamma) as f32;
    let lin = simple_isp_linear(raw, p)?;
    SrgbImage::from_clamped(lin.map(|v| v.max(0.0).powf(inv_gamma)))
}

/// Runs the ISP backwards: gamma decode, `ccm⁻¹`, `1/gains`, then keeps the
/// CFA color of each site and packs. Values are clamped to `[0, 1]`.
pub fn inverse_isp(img: &SrgbImage, p: &SynthParams) -> Result<PackedRaw> {
    p.validate()?;
    let response = p.camera_response()?;
    let (h, w) = img.dims();
    let t = img.tensor();
    let gamma = p.gamma as f32;
    let mut data = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            let k = i * w + j;
            let lin = [0, 1, 2].map(|c| t.channel(c)[k].powf(gamma) as f64);
            let cam = response.apply(lin);
            data.push(cam[RawMosaic::cfa_color(i, j)].clamp(0.0, 1.0) as f32);
        }
    }
    Ok(pack_rggb(&RawMosaic::new(h, w, data)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moiresynth::Mat3;

    fn constant_raw(v: f32, h2: usize, w2: usize) -> PackedRaw {
        PackedRaw::new(Tensor::full(vec![4, h2, w2], v)).unwrap()
    }

    fn neutral(gamma: f64) -> SynthParams {
        SynthParams { gamma, ..SynthParams::identity() }
    }

    #[test]
    fn constant_raw_through_gamma() {
        let out = simple_isp(&constant_raw(0.25, 4, 4), &neutral(2.2)).unwrap();
        let expect = 0.25f64.powf(1.0 / 2.2);
        assert!((expect - 0.5326).abs() < 1e-4);
        assert!(out.tensor().data().iter().all(|&v| (v as f64 - expect).abs() < 1e-3));
    }

    #[test]
    fn identity_pipeline_preserves_constant() {
        let out = simple_isp(&constant_raw(0.6, 3, 5), &neutral(1.0)).unwrap();
        assert!(out.tensor().data().iter().all(|&v| (v - 0.6).abs() < 1e-6));
        let back = inverse_isp(&out, &neutral(1.0)).unwrap();
        assert!(back.tensor().data().iter().all(|&v| (v - 0.6).abs() < 1e-6));
    }

    #[test]
    fn red_gain_scales_linear_red() {
        let raw = PackedRaw::new(Tensor::random(vec![4, 4, 4], 0.1, 0.9, 3)).unwrap();
        let base = simple_isp_linear(&raw, &neutral(1.0)).unwrap();
        let p = SynthParams { wb_gains: [2.0, 1.0, 1.0], ..neutral(1.0) };
        let doubled = simple_isp_linear(&raw, &p).unwrap();
        for (a, b) in doubled.channel(0).iter().zip(base.channel(0)) {
            assert!((a - 2.0 * b).abs() < 1e-6);
        }
        assert_eq!(doubled.channel(1), base.channel(1));
    }

    #[test]
    fn demosaic_reproduces_linear_ramps() {
        // Bilinear interpolation is exact on affine signals away from the mirror.
        let (h, w) = (8, 10);
        let f = |i: usize, j: usize| 0.1 + 0.03 * i as f32 + 0.02 * j as f32;
        let m = RawMosaic::new(h, w, (0..h * w).map(|k| f(k / w, k % w)).collect()).unwrap();
        let d = demosaic_bilinear(&m);
        for c in 0..3 {
            for i in 1..h - 1 {
                for j in 1..w - 1 {
                    assert!((d.channel(c)[i * w + j] - f(i, j)).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn roundtrip_on_smooth_image() {
        let p = SynthParams::default();
        let (h, w) = (32, 48);
        let img = SrgbImage::new(Tensor::from_fn(vec![3, h, w], |k| {
            let (c, i, j) = (k / (h * w), k / w % h, k % w);
            0.3 + 0.3 * (i as f32 / h as f32) + 0.2 * (j as f32 / w as f32) - 0.05 * c as f32
        }))
        .unwrap();
        let back = simple_isp(&inverse_isp(&img, &p).unwrap(), &p).unwrap();
        let err = back.tensor().max_abs_diff(img.tensor());
        assert!(err < 0.02, "roundtrip error {err}");
    }

    #[test]
    fn singular_ccm_rejected() {
        let mut p = SynthParams::identity();
        p.ccm = Mat3([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]]);
        let img = SrgbImage::new(Tensor::full(vec![3, 2, 2], 0.5)).unwrap();
        assert!(inverse_isp(&img, &p).is_err());
    }
}
