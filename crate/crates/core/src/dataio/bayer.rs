use crate::error::{shape_err, Error, Result};
use crate::tensorkernels::Tensor;

fn check_unit_range(data: &[f32], what: &str) -> Result<()> {
    if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Dataset(format!("{what} value {v} outside [0, 1]")));
    }
    Ok(())
}

/// Single-channel sensor mosaic with RGGB phase: R at (0,0), G at (0,1) and
/// (1,0), B at (1,1).
#[derive(Clone, Debug, PartialEq)]
pub struct RawMosaic {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl RawMosaic {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || !height.is_multiple_of(2) || !width.is_multiple_of(2) {
            return shape_err("raw_mosaic", format!("dims {height}×{width} must be even and positive"));
        }
        if data.len() != height * width {
            return shape_err("raw_mosaic", format!("{height}×{width} needs {} values, got {}", height * width, data.len()));
        }
        check_unit_range(&data, "mosaic")?;
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn at(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// CFA color index (0 = R, 1 = G, 2 = B) at a sensor position.
    pub fn cfa_color(y: usize, x: usize) -> usize {
        match (y % 2, x % 2) {
            (0, 0) => 0,
            (1, 1) => 2,
            _ => 1,
        }
    }
}

/// `4×(H/2)×(W/2)` packed RAW, channel order `[R, G1, G2, B]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedRaw(Tensor<f32>);

impl PackedRaw {
    pub fn new(t: Tensor<f32>) -> Result<Self> {
        let (c, _, _) = t.chw("packed_raw")?;
        if c != 4 {
            return shape_err("packed_raw", format!("expected 4 channels, got {c}"));
        }
        check_unit_range(t.data(), "packed raw")?;
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &Tensor<f32> {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor<f32> {
        self.0
    }

    /// `(H/2, W/2)`.
    pub fn half_dims(&self) -> (usize, usize) {
        (self.0.dims()[1], self.0.dims()[2])
    }
}

/// `3×H×W` sRGB image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SrgbImage(Tensor<f32>);

impl SrgbImage {
    pub fn new(t: Tensor<f32>) -> Result<Self> {
        let (c, _, _) = t.chw("srgb_image")?;
        if c != 3 {
            return shape_err("srgb_image", format!("expected 3 channels, got {c}"));
        }
        check_unit_range(t.data(), "sRGB")?;
        Ok(Self(t))
    }

    /// Clamps into `[0, 1]` (NaN becomes 0) before wrapping.
    pub fn from_clamped(t: Tensor<f32>) -> Result<Self> {
        Self::new(t.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }))
    }

    pub fn tensor(&self) -> &Tensor<f32> {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor<f32> {
        self.0
    }

    /// `(H, W)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.0.dims()[1], self.0.dims()[2])
    }
}

/// Channel `c` at `(i, j)` takes the mosaic value at `(2i + c/2, 2j + c%2)`.
pub fn pack_rggb(m: &RawMosaic) -> PackedRaw {
    let (h2, w2) = (m.height / 2, m.width / 2);
    let t = Tensor::from_fn(vec![4, h2, w2], |k| {
        let (c, i, j) = (k / (h2 * w2), k / w2 % h2, k % w2);
        m.at(2 * i + c / 2, 2 * j + c % 2)
    });
    PackedRaw(t)
}

pub fn unpack_rggb(p: &PackedRaw) -> RawMosaic {
    let (h2, w2) = p.half_dims();
    let (h, w) = (2 * h2, 2 * w2);
    let t = p.tensor();
    let data = (0..h * w)
        .map(|k| {
            let (y, x) = (k / w, k % w);
            let c = (y % 2) * 2 + x % 2;
            t.data()[(c * h2 + y / 2) * w2 + x / 2]
        })
        .collect();
    RawMosaic { height: h, width: w, data }
}
