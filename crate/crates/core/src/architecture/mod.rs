//! The two-branch network: per-domain shallow extraction and SCDM
//! encoder/decoders (GFM skips for RAW, FSM skips for sRGB), RAW-guided
//! channel mixing, reconstruction, the two output heads, the joint L1 loss
//! and the checkpoint format.
//!
//! Both heads add their prediction to the corresponding input and start at
//! zero, so a freshly built model returns its inputs.

mod checkpoint;
mod config;
mod loss;
mod model;
mod rgisp;
mod scdm;
mod suite;

pub use checkpoint::{load_params, Checkpoint, CheckpointHeader};
pub use config::{LambdaPolicy, ModelConfig, Variant};
pub use loss::{joint_loss, joint_loss_value};
pub use model::{build_model, Branch, Fusion, Network, Outputs, Reconstruction, RridModel};
pub use rgisp::Rgisp;
pub use scdm::{Block, Scdm, Skip, SkipKind};
pub use suite::gradient_suite;

#[cfg(test)]
mod tests;
