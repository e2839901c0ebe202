use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::capture::bilinear;
use super::{camera_capture, inverse_isp, procedural_scene, simple_isp, simulate_screen, SynthConfig, SynthParams};
use crate::dataio::{pack_rggb, save_pair, SamplePair, Split, SrgbImage};
use crate::error::{Error, Result};
use crate::tensorkernels::Tensor;

/// Screen content that, once photographed through `p.warp`, lines up with
/// `clean` on the sensor. The screen is padded so the warped sensor footprint
/// stays inside it.
fn prewarped_screen(clean: &SrgbImage, p: &SynthParams) -> Result<SrgbImage> {
    let inv = p
        .warp
        .inverse()
        .map_err(|_| Error::Synth(format!("degenerate homography (det = {:e})", p.warp.det())))?;
    let (h, w) = clean.dims();
    let (mut ext_u, mut ext_v) = (0.0f64, 0.0f64);
    for (x, y) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
        let (u, v) = p
            .warp
            .project(x * w as f64 / 2.0, y * h as f64 / 2.0)
            .ok_or_else(|| Error::Synth("homography maps a sensor corner to infinity".into()))?;
        ext_u = ext_u.max(u.abs());
        ext_v = ext_v.max(v.abs());
    }
    let (sh, sw) = (2 * ext_v.ceil() as usize + 4, 2 * ext_u.ceil() as usize + 4);
    let src = clean.tensor();
    let mut out = Tensor::zeros(vec![3, sh, sw]);
    for a in 0..sh {
        for b in 0..sw {
            let (x, y) = inv
                .project(b as f64 + 0.5 - sw as f64 / 2.0, a as f64 + 0.5 - sh as f64 / 2.0)
                .ok_or_else(|| Error::Synth("inverse homography maps a screen point to infinity".into()))?;
            let (sy, sx) = (y + h as f64 / 2.0 - 0.5, x + w as f64 / 2.0 - 0.5);
            for c in 0..3 {
                out.channel_mut(c)[a * sw + b] = bilinear(src.channel(c), h, w, sy, sx) as f32;
            }
        }
    }
    SrgbImage::from_clamped(out)
}

/// Synthesizes one training pair from a clean image.
///
/// Moiré branch: screen rendering, capture, packing, then the ISP with
/// cast-perturbed parameters. Clean branch: `clean` itself and its
/// [`inverse_isp`] under the unperturbed parameters. The id is the seed.
pub fn synth_pair(clean: &SrgbImage, p: &SynthParams) -> Result<SamplePair> {
    p.validate()?;
    let (h, w) = clean.dims();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Synth(format!("clean image dims {h}×{w} must be even")));
    }
    let screen = prewarped_screen(clean, p)?;
    let radiance = simulate_screen(&screen, p);
    let moire_raw = pack_rggb(&camera_capture(&radiance, p, h, w)?);
    let moire_rgb = simple_isp(&moire_raw, &p.with_cast()?)?;
    let clean_raw = inverse_isp(clean, p)?;
    SamplePair::new(format!("{:016x}", p.seed), moire_raw, moire_rgb, clean_raw, clean.clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub scene_seed: u64,
    pub params: SynthParams,
}

/// Provenance written next to a synthesized split as `synth_params.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSidecar {
    pub split: String,
    pub seed: u64,
    pub size: usize,
    pub config: SynthConfig,
    pub samples: Vec<SampleRecord>,
}

fn mix_seed(seed: u64, split: Split, index: usize, stream: u64) -> u64 {
    // SplitMix64 finalizer over the packed coordinates.
    let mut z = seed ^ ((split as u64) << 62) ^ ((index as u64) << 8) ^ stream;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d4_9bb1_3311_49eb);
    z ^ (z >> 31)
}

/// Synthesizes `count` square pairs of side `size` from procedural scenes into
/// `root/{split}/` and writes the parameter sidecar. Pairs are generated in
/// parallel; output depends only on the arguments.
pub fn synthesize_split(
    root: impl AsRef<Path>,
    split: Split,
    count: usize,
    size: usize,
    cfg: &SynthConfig,
    seed: u64,
) -> Result<SplitSidecar> {
    if size == 0 || !size.is_multiple_of(2) {
        return Err(Error::Synth(format!("patch size {size} must be even and positive")));
    }
    let dir = root.as_ref().join(split.as_str());
    std::fs::create_dir_all(&dir)?;
    let samples = (0..count)
        .into_par_iter()
        .map(|i| {
            let scene_seed = mix_seed(seed, split, i, 1);
            let params = cfg.sample(mix_seed(seed, split, i, 2))?;
            let mut pair = synth_pair(&procedural_scene(size, size, scene_seed), &params)?;
            pair.id = format!("{i:05}");
            save_pair(&dir, &pair)?;
            Ok(SampleRecord { id: pair.id, scene_seed, params })
        })
        .collect::<Result<Vec<_>>>()?;
    let sidecar = SplitSidecar { split: split.to_string(), seed, size, config: cfg.clone(), samples };
    std::fs::write(dir.join("synth_params.json"), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::load_dataset;

    fn channel_means(t: &Tensor<f32>) -> [f64; 3] {
        let n = (t.numel() / 3) as f64;
        [0, 1, 2].map(|c| t.channel(c).iter().map(|&v| v as f64).sum::<f64>() / n)
    }

    #[test]
    fn shapes_and_determinism() {
        let clean = procedural_scene(32, 48, 3);
        let p = SynthConfig::default().sample(5).unwrap();
        let pair = synth_pair(&clean, &p).unwrap();
        assert_eq!(pair.moire_raw.half_dims(), (16, 24));
        assert_eq!(pair.clean_raw.half_dims(), (16, 24));
        assert_eq!(pair.moire_rgb.dims(), (32, 48));
        assert_eq!(pair, synth_pair(&clean, &p).unwrap());
        let odd = SrgbImage::new(Tensor::zeros(vec![3, 5, 6])).unwrap();
        assert!(synth_pair(&odd, &p).is_err());
    }

    /// Smooth two-color gradient, free of edges that optics would smear.
    fn smooth_scene(n: usize, seed: u64) -> SrgbImage {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (a, b): ([f32; 3], [f32; 3]) = (
            [0, 1, 2].map(|_| rng.random_range(0.3..0.7)),
            [0, 1, 2].map(|_| rng.random_range(0.3..0.7)),
        );
        SrgbImage::new(Tensor::from_fn(vec![3, n, n], |k| {
            let (c, i, j) = (k / (n * n), k / n % n, k % n);
            let t = (i + j) as f32 / (2 * n - 2) as f32;
            a[c] * (1.0 - t) + b[c] * t
        }))
        .unwrap()
    }

    #[test]
    fn no_cast_keeps_color_balance_and_energy() {
        // Warps whose beat completes several periods inside the frame, so the
        // moiré averages out of the channel means.
        for (k, (scale, deg)) in [(0.95f64, 2.0f64), (1.05, -2.0), (0.96, -1.0), (1.04, 3.0)].into_iter().enumerate() {
            let (sin, cos) = deg.to_radians().sin_cos();
            let p = SynthParams {
                warp: super::super::Mat3([[scale * cos, -scale * sin, 0.0], [scale * sin, scale * cos, 0.0], [0.0, 0.0, 1.0]]),
                cast_strength: 0.0,
                seed: k as u64,
                ..SynthParams::default()
            };
            let pair = synth_pair(&smooth_scene(128, k as u64), &p).unwrap();
            let m = channel_means(pair.moire_rgb.tensor());
            let c = channel_means(pair.clean_rgb.tensor());
            let ratio = |v: [f64; 3]| [v[0] / v[1], v[2] / v[1]];
            let (rm, rc) = (ratio(m), ratio(c));
            for i in 0..2 {
                assert!((rm[i] / rc[i] - 1.0).abs() < 0.01, "case {k}: channel ratios {rm:?} vs {rc:?}");
            }
            let (em, ec) = (m.iter().sum::<f64>(), c.iter().sum::<f64>());
            assert!((em / ec - 1.0).abs() < 0.15, "case {k}: energy {em} vs {ec}");
        }
    }

    #[test]
    fn procedural_scenes_keep_energy() {
        let cfg = SynthConfig { cast_strength_range: [0.0, 0.0], ..SynthConfig::default() };
        for seed in 0..4 {
            let pair = synth_pair(&procedural_scene(64, 64, 100 + seed), &cfg.sample(seed).unwrap()).unwrap();
            let (em, ec) = (pair.moire_rgb.tensor().sum_f64(), pair.clean_rgb.tensor().sum_f64());
            assert!((em / ec - 1.0).abs() < 0.15, "seed {seed}: energy {em} vs {ec}");
        }
    }

    #[test]
    fn gray_card_beat_tracks_warp_scale() {
        use rustfft::{num_complex::Complex, FftPlanner};
        let (h, w) = (8, 256);
        let card = SrgbImage::new(Tensor::full(vec![3, h, w], 0.5)).unwrap();
        for scale in [0.96, 1.03] {
            let p = SynthParams {
                warp: super::super::Mat3([[scale, 0.0, 0.0], [0.0, scale, 0.0], [0.0, 0.0, 1.0]]),
                noise_read: 0.0,
                noise_shot: 0.0,
                cast_strength: 0.0,
                ..SynthParams::default()
            };
            let pair = synth_pair(&card, &p).unwrap();
            let red = pair.moire_raw.tensor().channel(0);
            let n = w / 2;
            let mut spectrum = vec![0.0; n];
            let fft = FftPlanner::new().plan_fft_forward(n);
            for row in red.chunks(n) {
                let mean = row.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
                let mut buf: Vec<Complex<f64>> = row.iter().map(|&v| Complex::new(v as f64 - mean, 0.0)).collect();
                fft.process(&mut buf);
                spectrum.iter_mut().zip(&buf).for_each(|(s, c)| *s += c.norm());
            }
            let peak = (1..n / 2).max_by(|&a, &b| spectrum[a].total_cmp(&spectrum[b])).unwrap();
            // Red sites repeat every 2 sensor pixels, so the stripe frequency
            // `scale` aliases to `|scale - 1|` cycles per sensor pixel.
            let expected = (scale - 1.0).abs() * w as f64;
            assert!((peak as f64 - expected).abs() <= 1.0, "scale {scale}: peak {peak}, expected {expected:.2}");
        }
    }

    #[test]
    fn split_roundtrips_through_dataset_loader() {
        let root = tempfile::tempdir().unwrap();
        let cfg = SynthConfig::default();
        let side = synthesize_split(root.path(), Split::Test, 3, 16, &cfg, 9).unwrap();
        let pairs = load_dataset(root.path(), Split::Test).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(side.samples.len(), 3);
        let json = std::fs::read_to_string(root.path().join("test/synth_params.json")).unwrap();
        assert_eq!(serde_json::from_str::<SplitSidecar>(&json).unwrap(), side);
        let again = tempfile::tempdir().unwrap();
        synthesize_split(again.path(), Split::Test, 3, 16, &cfg, 9).unwrap();
        assert_eq!(load_dataset(again.path(), Split::Test).unwrap(), pairs);
    }
}
