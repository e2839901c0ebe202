//! Optimisation and evaluation: AdamW, the multistep learning-rate
//! schedule, the training loop with checkpoint/resume, and PSNR/SSIM.

mod config;
mod evaluate;
mod metrics;
mod optim;
mod train;

pub use config::TrainConfig;
pub use evaluate::{evaluate, evaluate_inputs, format_metric, EvalReport, EvalRow};
pub use metrics::{psnr, ssim, ssim_tensor};
pub use optim::{adamw_step, AdamW, OptimState};
pub use train::{
    train_loop, write_json, EpochMetrics, TrainOptions, TrainReport, TrainState, Trainer, BEST_CHECKPOINT,
    LAST_CHECKPOINT, TRAIN_LOG,
};

#[cfg(test)]
mod tests;
