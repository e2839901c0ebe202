use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::evaluate::evaluate;
use super::optim::{adamw_step, AdamW, OptimState};
use crate::architecture::{joint_loss, load_params, Checkpoint, RridModel};
use crate::dataio::{crop_patch, SamplePair};
use crate::error::{Error, Result};
use crate::tensorkernels::{ParamId, Tape, Tensor};

/// Progress stored in checkpoints so training can resume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub step: u64,
    pub epochs_done: usize,
    pub best_psnr: Option<f64>,
    pub config: TrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    /// Mean batch loss of every step run by this call.
    pub losses: Vec<f64>,
    pub epochs: Vec<EpochMetrics>,
    pub final_step: u64,
    pub best_psnr: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Directory for `last.ckpt`, `best.ckpt` and `train_log.jsonl`.
    pub out_dir: Option<PathBuf>,
    /// Poisons the loss at this global step (exercises the abort path).
    pub nan_at_step: Option<u64>,
}

pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const TRAIN_LOG: &str = "train_log.jsonl";

/// A model together with its optimizer state and training progress.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: RridModel,
    pub optim: OptimState,
    pub state: TrainState,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Trainer {
    pub fn new(model: RridModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optim = OptimState::new(&model.params);
        Ok(Self { model, optim, state: TrainState { step: 0, epochs_done: 0, best_psnr: None, config } })
    }

    /// Checkpoint holding parameters, AdamW moments (`adam.m/…`, `adam.v/…`)
    /// and the training state.
    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut state = serde_json::to_value(&self.state)?;
        state["adam_step"] = self.optim.step.into();
        let mut ck = Checkpoint::from_model(&self.model, Some(state));
        for (p, (m, v)) in self.model.params.iter().zip(self.optim.m.iter().zip(&self.optim.v)) {
            ck.tensors.push((format!("adam.m/{}", p.name), m.clone()));
            ck.tensors.push((format!("adam.v/{}", p.name), v.clone()));
        }
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let model = ck.into_model()?;
        let raw = ck
            .header
            .train_state
            .clone()
            .ok_or_else(|| Error::Format("checkpoint has no training state".into()))?;
        let adam_step = raw.get("adam_step").and_then(|v| v.as_u64()).unwrap_or(0);
        let state: TrainState =
            serde_json::from_value(raw).map_err(|e| Error::Format(format!("training state: {e}")))?;
        let mut optim = OptimState::new(&model.params);
        optim.step = adam_step;
        let mut ms = model.params.clone();
        load_params(&mut ms, ck, "adam.m/")?;
        let mut vs = model.params.clone();
        load_params(&mut vs, ck, "adam.v/")?;
        optim.m = ms.iter().map(|p| p.value.clone()).collect();
        optim.v = vs.iter().map(|p| p.value.clone()).collect();
        Ok(Self { model, optim, state })
    }

    pub fn resume(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    /// Batch gradient: per-sample tapes run in parallel and their gradients
    /// are summed in sample order, so the result does not depend on the
    /// thread count.
    fn batch_gradient(&mut self, batch: &[SamplePair]) -> Result<f64> {
        let model = &self.model;
        let alpha = model.config.alpha;
        let scale = 1.0 / batch.len() as f64;
        let per_sample = batch
            .par_iter()
            .map(|s| -> Result<(f64, Vec<(ParamId, Tensor<f32>)>)> {
                let mut tape = Tape::<f32>::new();
                let rgb = tape.input(s.moire_rgb.tensor().clone());
                let raw = tape.input(s.moire_raw.tensor().clone());
                let out = model.net.forward(&mut tape, &model.params, rgb, raw)?;
                let y_rgb = tape.input(s.clean_rgb.tensor().clone());
                let y_raw = tape.input(s.clean_raw.tensor().clone());
                let loss = joint_loss(&mut tape, out.rgb, y_rgb, out.raw, y_raw, alpha)?;
                let value = tape.value(loss).item() as f64;
                let loss = tape.scale(loss, scale);
                Ok((value, tape.backward(loss)?.into_param_grads()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = 0.0;
        for (value, grads) in per_sample {
            total += value;
            for (id, g) in grads {
                self.model.params.accumulate(id, &g, 1.0)?;
            }
        }
        Ok(total * scale)
    }

    fn crops(&self, data: &[SamplePair], idx: &[usize]) -> Result<Vec<SamplePair>> {
        let cfg = &self.state.config;
        let p = cfg.patch_size;
        idx.iter()
            .enumerate()
            .map(|(slot, &i)| {
                let s = &data[i];
                let (h, w) = s.dims();
                let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, self.state.step, slot as u64));
                let y = 2 * rng.random_range(0..=(h - p) / 2);
                let x = 2 * rng.random_range(0..=(w - p) / 2);
                crop_patch(s, x, y, p)
            })
            .collect()
    }

    /// Runs the remaining epochs. `val` drives the best checkpoint; when it is
    /// empty the best checkpoint tracks the last one.
    pub fn run(&mut self, train: &[SamplePair], val: &[SamplePair], opts: &TrainOptions) -> Result<TrainReport> {
        let cfg = self.state.config.clone();
        cfg.validate()?;
        if train.is_empty() {
            return Err(Error::Dataset("training split is empty".into()));
        }
        let p = cfg.patch_size;
        if let Some(s) = train.iter().find(|s| s.dims().0 < p || s.dims().1 < p) {
            return Err(Error::Dataset(format!("sample {} is smaller than patch_size {p}", s.id)));
        }
        let mut log = match &opts.out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let f = OpenOptions::new().create(true).append(true).open(dir.join(TRAIN_LOG))?;
                Some(BufWriter::new(f))
            }
            None => None,
        };
        let mut report = TrainReport::default();
        for epoch in self.state.epochs_done..cfg.epochs {
            let lr = cfg.lr_at(epoch);
            let mut order: Vec<usize> = (0..train.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(cfg.seed, u64::MAX, epoch as u64)));
            for idx in order.chunks(cfg.batch_size) {
                let batch = self.crops(train, idx)?;
                self.state.step += 1;
                let mut loss = self.batch_gradient(&batch)?;
                if opts.nan_at_step == Some(self.state.step) {
                    loss = f64::NAN;
                }
                if !loss.is_finite() {
                    self.model.params.zero_grad();
                    return Err(Error::NonFinite(format!("training loss at step {}", self.state.step)));
                }
                let opt = AdamW { lr, betas: cfg.betas, weight_decay: cfg.weight_decay, eps: cfg.eps };
                adamw_step(&mut self.model.params, &mut self.optim, opt)?;
                report.losses.push(loss);
                if let Some(w) = log.as_mut() {
                    let rec = serde_json::json!({"step": self.state.step, "epoch": epoch, "lr": lr, "loss": loss});
                    writeln!(w, "{rec}")?;
                }
            }
            self.state.epochs_done = epoch + 1;
            let last = epoch + 1 == cfg.epochs;
            let mut improved = val.is_empty();
            if !val.is_empty() && ((epoch + 1) % cfg.eval_every == 0 || last) {
                let ev = evaluate(&self.model, val)?;
                log::info!("epoch {epoch}: psnr {:.3} ssim {:.4}", ev.mean_psnr, ev.mean_ssim);
                if let Some(w) = log.as_mut() {
                    let rec = serde_json::json!({"epoch": epoch, "psnr": ev.mean_psnr, "ssim": ev.mean_ssim});
                    writeln!(w, "{rec}")?;
                }
                improved = self.state.best_psnr.is_none_or(|b| ev.mean_psnr > b);
                if improved {
                    self.state.best_psnr = Some(ev.mean_psnr);
                }
                report.epochs.push(EpochMetrics { epoch, psnr: ev.mean_psnr, ssim: ev.mean_ssim });
            }
            if let Some(dir) = &opts.out_dir {
                let ck = self.checkpoint()?;
                ck.save(dir.join(LAST_CHECKPOINT))?;
                if improved {
                    ck.save(dir.join(BEST_CHECKPOINT))?;
                }
            }
            if let Some(w) = log.as_mut() {
                w.flush()?;
            }
        }
        report.final_step = self.state.step;
        report.best_psnr = self.state.best_psnr;
        Ok(report)
    }
}

/// Trains `model` in place from scratch.
pub fn train_loop(
    model: &mut RridModel,
    train: &[SamplePair],
    val: &[SamplePair],
    cfg: &TrainConfig,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    let mut t = Trainer::new(model.clone(), cfg.clone())?;
    let r = t.run(train, val, opts);
    *model = t.model;
    r
}

/// Writes `value` as pretty JSON.
pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
