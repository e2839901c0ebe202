//! 16-bit PNG I/O, normalised by 65535.

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};

use super::{RawMosaic, SrgbImage};
use crate::error::{Error, Result};
use crate::tensorkernels::Tensor;

fn img_err(path: &Path, e: impl ToString) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

fn quantize(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn dequantize(v: u16) -> f32 {
    v as f32 / 65535.0
}

/// Writes a mosaic as single-channel 16-bit PNG.
pub fn write_mosaic_png(path: impl AsRef<Path>, m: &RawMosaic) -> Result<()> {
    let path = path.as_ref();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
        m.width() as u32,
        m.height() as u32,
        m.data().iter().map(|&v| quantize(v)).collect(),
    )
    .ok_or_else(|| img_err(path, "buffer size mismatch"))?;
    buf.save(path).map_err(|e| img_err(path, e))
}

pub fn read_mosaic_png(path: impl AsRef<Path>) -> Result<RawMosaic> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| img_err(path, e))?.into_luma16();
    let (w, h) = img.dimensions();
    RawMosaic::new(h as usize, w as usize, img.into_raw().into_iter().map(dequantize).collect())
        .map_err(|e| img_err(path, e))
}

/// Writes a `3×H×W` image as 16-bit RGB PNG. Values are clamped to `[0, 1]`.
pub fn write_rgb_png(path: impl AsRef<Path>, img: &SrgbImage) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = img.dims();
    let t = img.tensor();
    let plane = h * w;
    let interleaved: Vec<u16> = (0..plane * 3)
        .map(|k| quantize(t.data()[(k % 3) * plane + k / 3]))
        .collect();
    let buf: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::from_raw(w as u32, h as u32, interleaved)
        .ok_or_else(|| img_err(path, "buffer size mismatch"))?;
    buf.save(path).map_err(|e| img_err(path, e))
}

/// Reads any PNG the `image` crate understands as a `3×H×W` image in `[0, 1]`.
pub fn read_rgb_png(path: impl AsRef<Path>) -> Result<SrgbImage> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| img_err(path, e))?.into_rgb16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.into_raw();
    let plane = h * w;
    let t = Tensor::from_fn(vec![3, h, w], |k| dequantize(raw[(k % plane) * 3 + k / plane]));
    SrgbImage::new(t).map_err(|e| img_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_png_roundtrip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        let img = SrgbImage::new(Tensor::random(vec![3, 6, 4], 0.0, 1.0, 2)).unwrap();
        write_rgb_png(&p, &img).unwrap();
        let back = read_rgb_png(&p).unwrap();
        assert!(back.tensor().max_abs_diff(img.tensor()) <= 0.5 / 65535.0 + 1e-7);
        // Quantized values survive exactly.
        write_rgb_png(&p, &back).unwrap();
        assert_eq!(read_rgb_png(&p).unwrap(), back);
    }

    #[test]
    fn mosaic_png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let data = (0..24).map(|i| i as f32 / 65535.0).collect();
        let m = RawMosaic::new(4, 6, data).unwrap();
        write_mosaic_png(&p, &m).unwrap();
        assert_eq!(read_mosaic_png(&p).unwrap(), m);
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_rgb_png("/nonexistent/nope.png").unwrap_err();
        assert!(err.to_string().contains("nope.png"));
    }
}
