use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Mat3;
use crate::error::{Error, Result};

/// Parameters of one synthesized capture.
///
/// Geometry: `subpixel_period` is the number of radiance samples per screen
/// pixel, i.e. the period of one R,G,B stripe triple on the supersampled
/// radiance grid (at least 3). `warp` maps centered sensor coordinates (in
/// sensor pixels) to centered screen coordinates (in screen pixels).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub subpixel_period: f64,
    pub warp: Mat3,
    /// Optics blur in sensor pixels.
    pub blur_sigma: f64,
    pub noise_read: f64,
    pub noise_shot: f64,
    pub wb_gains: [f64; 3],
    /// Row-normalized color correction matrix (camera RGB to linear sRGB).
    pub ccm: Mat3,
    pub gamma: f64,
    pub cast_strength: f64,
    pub seed: u64,
    /// Side of the light-sensitive square of a sensor pixel, as a fraction of the pitch.
    #[serde(default = "default_fill_factor")]
    pub fill_factor: f64,
    /// Sensor gain applied to the integrated radiance before noise.
    #[serde(default = "default_exposure")]
    pub exposure: f64,
}

fn default_fill_factor() -> f64 {
    0.5
}

/// Each stripe lights a third of the screen, so ×3 restores the displayed level.
fn default_exposure() -> f64 {
    3.0
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            subpixel_period: 3.0,
            warp: Mat3::IDENTITY,
            blur_sigma: 0.25,
            noise_read: 0.004,
            noise_shot: 0.002,
            wb_gains: [1.9, 1.0, 1.5],
            ccm: Mat3([[1.3, -0.2, -0.1], [-0.15, 1.25, -0.1], [0.05, -0.3, 1.25]]),
            gamma: 2.2,
            cast_strength: 0.15,
            seed: 0,
            fill_factor: default_fill_factor(),
            exposure: default_exposure(),
        }
    }
}

impl SynthParams {
    /// Neutral pipeline: no warp, blur, noise, gains, color mixing, gamma or cast.
    pub fn identity() -> Self {
        Self {
            subpixel_period: 3.0,
            warp: Mat3::IDENTITY,
            blur_sigma: 0.0,
            noise_read: 0.0,
            noise_shot: 0.0,
            wb_gains: [1.0; 3],
            ccm: Mat3::IDENTITY,
            gamma: 1.0,
            cast_strength: 0.0,
            seed: 0,
            fill_factor: 1.0,
            exposure: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Synth(msg));
        if !(self.subpixel_period >= 3.0 && self.subpixel_period.is_finite()) {
            return bad(format!("subpixel_period must be >= 3 radiance samples, got {}", self.subpixel_period));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.blur_sigma >= 0.0 && self.noise_read >= 0.0 && self.noise_shot >= 0.0) {
            return bad("blur and noise parameters must be non-negative".into());
        }
        if self.wb_gains.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return bad(format!("wb_gains must be positive, got {:?}", self.wb_gains));
        }
        if let Some(s) = self.ccm.row_sums().iter().find(|s| (*s - 1.0).abs() > 1e-6) {
            return bad(format!("ccm rows must sum to 1, found a row summing to {s}"));
        }
        if !(0.0..=0.3).contains(&self.cast_strength) {
            return bad(format!("cast_strength must lie in [0, 0.3], got {}", self.cast_strength));
        }
        if !(self.fill_factor > 0.0 && self.fill_factor <= 1.0) {
            return bad(format!("fill_factor must lie in (0, 1], got {}", self.fill_factor));
        }
        if !(self.exposure > 0.0 && self.exposure.is_finite()) {
            return bad(format!("exposure must be positive, got {}", self.exposure));
        }
        Ok(())
    }

    /// Camera response: linear scene RGB to sensor RGB, `diag(1/g)·ccm⁻¹`.
    pub fn camera_response(&self) -> Result<Mat3> {
        let inv_gains = Mat3::diag(self.wb_gains.map(|g| 1.0 / g));
        Ok(inv_gains.mul(&self.ccm.inverse()?))
    }

    /// ISP parameters of the moiré branch: gains scaled by `1 + cast·u` and
    /// the ccm blended towards a random row-stochastic matrix, both drawn
    /// from `seed`. Identity when `cast_strength` is 0.
    pub fn with_cast(&self) -> Result<Self> {
        let c = self.cast_strength;
        if c == 0.0 {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x0ca5_7ca5_7ca5_7ca5);
        let mut out = self.clone();
        for g in &mut out.wb_gains {
            *g *= 1.0 + c * rng.random_range(-1.0..1.0);
        }
        let mut mix = [[0.0; 3]; 3];
        for (r, row) in mix.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = if r == k { 1.0 } else { 0.0 } + 0.5 * rng.random_range(-1.0..1.0);
            }
        }
        let mix = Mat3(mix).row_normalized()?;
        let mut blended = self.ccm.0;
        for r in 0..3 {
            for k in 0..3 {
                blended[r][k] = (1.0 - c) * self.ccm.0[r][k] + c * mix.0[r][k];
            }
        }
        out.ccm = Mat3(blended).row_normalized()?;
        Ok(out)
    }
}

/// Sampling ranges for per-image [`SynthParams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub subpixel_period: f64,
    pub max_rotation_deg: f64,
    pub scale_range: [f64; 2],
    /// Largest magnitude of the projective row terms, per sensor pixel.
    pub max_perspective: f64,
    pub blur_sigma_range: [f64; 2],
    pub noise_read: f64,
    pub noise_shot: f64,
    pub wb_gains: [f64; 3],
    pub ccm: Mat3,
    pub gamma: f64,
    pub cast_strength_range: [f64; 2],
    pub fill_factor: f64,
    pub exposure: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let p = SynthParams::default();
        Self {
            subpixel_period: p.subpixel_period,
            max_rotation_deg: 3.0,
            scale_range: [0.95, 1.05],
            max_perspective: 2e-4,
            blur_sigma_range: [0.1, 0.2],
            noise_read: p.noise_read,
            noise_shot: p.noise_shot,
            wb_gains: p.wb_gains,
            ccm: p.ccm,
            gamma: p.gamma,
            cast_strength_range: [0.05, 0.2],
            fill_factor: p.fill_factor,
            exposure: p.exposure,
        }
    }
}

impl SynthConfig {
    /// Draws the parameters of one capture; the result is a pure function of `seed`.
    pub fn sample(&self, seed: u64) -> Result<SynthParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |r: [f64; 2]| if r[1] > r[0] { rng.random_range(r[0]..r[1]) } else { r[0] };
        let theta = uniform([-self.max_rotation_deg, self.max_rotation_deg]).to_radians();
        let s = uniform(self.scale_range);
        let px = uniform([-self.max_perspective, self.max_perspective]);
        let py = uniform([-self.max_perspective, self.max_perspective]);
        let blur_sigma = uniform(self.blur_sigma_range);
        let cast_strength = uniform(self.cast_strength_range);
        let (sin, cos) = theta.sin_cos();
        let warp = Mat3([[s * cos, -s * sin, 0.0], [s * sin, s * cos, 0.0], [px, py, 1.0]]);
        let p = SynthParams {
            subpixel_period: self.subpixel_period,
            warp,
            blur_sigma,
            noise_read: self.noise_read,
            noise_shot: self.noise_shot,
            wb_gains: self.wb_gains,
            ccm: self.ccm,
            gamma: self.gamma,
            cast_strength,
            seed,
            fill_factor: self.fill_factor,
            exposure: self.exposure,
        };
        p.validate()?;
        Ok(p)
    }
}
