use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{psnr, ssim};
use crate::architecture::RridModel;
use crate::dataio::{SamplePair, SrgbImage};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRow {
    pub id: String,
    pub psnr: f64,
    pub ssim: f64,
}

/// Per-sample metrics in dataset order plus their means.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

/// Metric values as written to reports; `+∞` becomes `inf`.
pub fn format_metric(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        v.to_string()
    }
}

impl EvalReport {
    pub fn from_rows(rows: Vec<EvalRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dataset("cannot evaluate an empty split".into()));
        }
        let n = rows.len() as f64;
        let mean_psnr = rows.iter().map(|r| r.psnr).sum::<f64>() / n;
        let mean_ssim = rows.iter().map(|r| r.ssim).sum::<f64>() / n;
        Ok(Self { rows, mean_psnr, mean_ssim })
    }

    /// `id,psnr,ssim` rows followed by a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,psnr,ssim\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.id, format_metric(r.psnr), format_metric(r.ssim));
        }
        let _ = writeln!(s, "mean,{},{}", format_metric(self.mean_psnr), format_metric(self.mean_ssim));
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn score(data: &[SamplePair], f: impl Fn(&SamplePair) -> Result<SrgbImage> + Sync) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::Dataset("cannot evaluate an empty split".into()));
    }
    let rows = data
        .par_iter()
        .map(|s| {
            let out = f(s)?;
            Ok(EvalRow {
                id: s.id.clone(),
                psnr: psnr(out.tensor(), s.clean_rgb.tensor(), 1.0)?,
                ssim: ssim(&out, &s.clean_rgb)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_rows(rows)
}

/// Scores the clamped sRGB output of `model` against the clean images.
pub fn evaluate(model: &RridModel, data: &[SamplePair]) -> Result<EvalReport> {
    score(data, |s| Ok(model.infer(&s.moire_rgb, &s.moire_raw)?.0))
}

/// Scores the moiréd inputs themselves against the clean images.
pub fn evaluate_inputs(data: &[SamplePair]) -> Result<EvalReport> {
    score(data, |s| Ok(s.moire_rgb.clone()))
}
