use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::SrgbImage;
use crate::tensorkernels::Tensor;

fn random_color(rng: &mut ChaCha8Rng) -> [f32; 3] {
    [0, 1, 2].map(|_| rng.random_range(0.1..0.9))
}

/// Seeded synthetic clean image: a color gradient overlaid with rectangles,
/// text-like bar blocks and soft blobs, loosely mimicking webpages, documents
/// and photos.
pub fn procedural_scene(height: usize, width: usize, seed: u64) -> SrgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (height as f32, width as f32);
    let mut img = vec![[0.0f32; 3]; height * width];

    let (c0, c1) = (random_color(&mut rng), random_color(&mut rng));
    let angle: f32 = rng.random_range(0.0..std::f32::consts::TAU);
    let (dy, dx) = angle.sin_cos();
    for (k, px) in img.iter_mut().enumerate() {
        let (y, x) = ((k / width) as f32 / h, (k % width) as f32 / w);
        let t = (0.5 + (x - 0.5) * dx + (y - 0.5) * dy).clamp(0.0, 1.0);
        *px = [0, 1, 2].map(|c| c0[c] * (1.0 - t) + c1[c] * t);
    }

    let fill = |img: &mut [[f32; 3]], y0: usize, x0: usize, rh: usize, rw: usize, col: [f32; 3], alpha: f32| {
        for y in y0..(y0 + rh).min(height) {
            for x in x0..(x0 + rw).min(width) {
                let px = &mut img[y * width + x];
                *px = [0, 1, 2].map(|c| px[c] * (1.0 - alpha) + col[c] * alpha);
            }
        }
    };

    for _ in 0..rng.random_range(2..=5) {
        let (rh, rw) = (rng.random_range(height / 8..=height / 2), rng.random_range(width / 8..=width / 2));
        let (y0, x0) = (rng.random_range(0..height), rng.random_range(0..width));
        let col = random_color(&mut rng);
        let alpha = rng.random_range(0.5..1.0);
        fill(&mut img, y0, x0, rh.max(1), rw.max(1), col, alpha);
    }

    for _ in 0..rng.random_range(0..=2) {
        let ink = [0, 1, 2].map(|_| rng.random_range(0.0..0.25));
        let (y0, x0) = (rng.random_range(0..height), rng.random_range(0..width));
        let line = rng.random_range(1..=2);
        let gap = rng.random_range(2..=4);
        for row in 0..rng.random_range(2..=6) {
            let len = rng.random_range(width / 8..=width / 2).max(1);
            fill(&mut img, y0 + row * (line + gap), x0, line, len, ink, 1.0);
        }
    }

    for _ in 0..rng.random_range(1..=3) {
        let (cy, cx) = (rng.random_range(0.0..h), rng.random_range(0.0..w));
        let radius = rng.random_range(0.05..0.25) * h.min(w);
        let col = random_color(&mut rng);
        for (k, px) in img.iter_mut().enumerate() {
            let (y, x) = ((k / width) as f32, (k % width) as f32);
            let a = 0.8 * (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * radius * radius)).exp();
            *px = [0, 1, 2].map(|c| px[c] * (1.0 - a) + col[c] * a);
        }
    }

    let t = Tensor::from_fn(vec![3, height, width], |k| img[k % (height * width)][k / (height * width)]);
    SrgbImage::from_clamped(t).expect("scene has 3 channels")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_varied() {
        let a = procedural_scene(32, 48, 1);
        assert_eq!(a.dims(), (32, 48));
        assert_eq!(a, procedural_scene(32, 48, 1));
        assert_ne!(a, procedural_scene(32, 48, 2));
    }
}
