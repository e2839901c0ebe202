use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use super::{pack_rggb, read_mosaic_png, read_rgb_png, unpack_rggb, write_mosaic_png, write_rgb_png};
use super::{PackedRaw, SrgbImage};
use crate::error::{Error, Result};
use crate::tensorkernels::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split {s:?} (expected train or test)"))),
        }
    }
}

const SUFFIXES: [&str; 4] = ["_moire_raw.png", "_moire_rgb.png", "_clean_raw.png", "_clean_rgb.png"];

/// A moiréd capture and its clean ground truth in both domains.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub id: String,
    pub moire_raw: PackedRaw,
    pub moire_rgb: SrgbImage,
    pub clean_raw: PackedRaw,
    pub clean_rgb: SrgbImage,
}

impl SamplePair {
    pub fn new(
        id: impl Into<String>,
        moire_raw: PackedRaw,
        moire_rgb: SrgbImage,
        clean_raw: PackedRaw,
        clean_rgb: SrgbImage,
    ) -> Result<Self> {
        let id = id.into();
        let (h, w) = moire_rgb.dims();
        let consistent = clean_rgb.dims() == (h, w)
            && moire_raw.half_dims() == (h / 2, w / 2)
            && clean_raw.half_dims() == (h / 2, w / 2)
            && h % 2 == 0
            && w % 2 == 0;
        if !consistent {
            return Err(Error::Dataset(format!(
                "{id}: inconsistent dims (moire rgb {:?}, clean rgb {:?}, moire raw {:?}, clean raw {:?})",
                moire_rgb.dims(),
                clean_rgb.dims(),
                moire_raw.half_dims(),
                clean_raw.half_dims()
            )));
        }
        Ok(Self { id, moire_raw, moire_rgb, clean_raw, clean_rgb })
    }

    /// sRGB `(H, W)`.
    pub fn dims(&self) -> (usize, usize) {
        self.moire_rgb.dims()
    }
}

/// Writes the four PNGs of a pair into `dir` using the dataset naming scheme.
pub fn save_pair(dir: impl AsRef<Path>, pair: &SamplePair) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let id = &pair.id;
    write_mosaic_png(dir.join(format!("{id}{}", SUFFIXES[0])), &unpack_rggb(&pair.moire_raw))?;
    write_rgb_png(dir.join(format!("{id}{}", SUFFIXES[1])), &pair.moire_rgb)?;
    write_mosaic_png(dir.join(format!("{id}{}", SUFFIXES[2])), &unpack_rggb(&pair.clean_raw))?;
    write_rgb_png(dir.join(format!("{id}{}", SUFFIXES[3])), &pair.clean_rgb)?;
    Ok(())
}

/// Loads `root/{split}/`, ordered lexicographically by sample id.
pub fn load_dataset(root: impl AsRef<Path>, split: Split) -> Result<Vec<SamplePair>> {
    let dir = root.as_ref().join(split.as_str());
    if !dir.is_dir() {
        return Err(Error::Dataset(format!("split directory {} not found", dir.display())));
    }
    let mut ids: BTreeMap<String, [bool; 4]> = BTreeMap::new();
    for entry in std::fs::read_dir(&dir)? {
        let name = entry?.file_name();
        let Some(name) = name.to_str() else { continue };
        for (k, suffix) in SUFFIXES.iter().enumerate() {
            if let Some(id) = name.strip_suffix(suffix) {
                ids.entry(id.to_string()).or_default()[k] = true;
            }
        }
    }
    for (id, present) in &ids {
        if let Some(k) = present.iter().position(|p| !p) {
            return Err(Error::Dataset(format!(
                "sample {id} is missing {id}{}",
                SUFFIXES[k]
            )));
        }
    }
    let ids: Vec<String> = ids.into_keys().collect();
    ids.par_iter()
        .map(|id| {
            let file = |k: usize| dir.join(format!("{id}{}", SUFFIXES[k]));
            SamplePair::new(
                id.clone(),
                pack_rggb(&read_mosaic_png(file(0))?),
                read_rgb_png(file(1))?,
                pack_rggb(&read_mosaic_png(file(2))?),
                read_rgb_png(file(3))?,
            )
        })
        .collect()
}

fn crop_chw(t: &Tensor<f32>, x: usize, y: usize, size: usize) -> Tensor<f32> {
    let (c, _, w) = (t.dims()[0], t.dims()[1], t.dims()[2]);
    let mut out = Vec::with_capacity(c * size * size);
    for ch in 0..c {
        let plane = t.channel(ch);
        for row in y..y + size {
            out.extend_from_slice(&plane[row * w + x..row * w + x + size]);
        }
    }
    Tensor::new(vec![c, size, size], out).expect("crop dims")
}

/// Crops an sRGB `size×size` window at `(x, y)` and the matching RAW window at
/// `(x/2, y/2)`. Offsets and size must be even so the Bayer phase is kept.
pub fn crop_patch(s: &SamplePair, x: usize, y: usize, size: usize) -> Result<SamplePair> {
    if !x.is_multiple_of(2) || !y.is_multiple_of(2) || !size.is_multiple_of(2) {
        return Err(Error::Dataset(format!(
            "crop offsets and size must be even to preserve the Bayer phase (x={x}, y={y}, size={size})"
        )));
    }
    let (h, w) = s.dims();
    if size == 0 || x + size > w || y + size > h {
        return Err(Error::Dataset(format!("crop {size}×{size} at ({x}, {y}) outside {h}×{w}")));
    }
    let rgb = |img: &SrgbImage| SrgbImage::new(crop_chw(img.tensor(), x, y, size));
    let raw = |p: &PackedRaw| PackedRaw::new(crop_chw(p.tensor(), x / 2, y / 2, size / 2));
    SamplePair::new(
        s.id.clone(),
        raw(&s.moire_raw)?,
        rgb(&s.moire_rgb)?,
        raw(&s.clean_raw)?,
        rgb(&s.clean_rgb)?,
    )
}
