//! Dual-domain (RAW + sRGB) image demoiréing.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensorkernels`]: tensors, differentiable operators, the autodiff tape and
//!   finite-difference gradient checking.
//! - [`frequency`]: orthonormal block DCT.
//! - [`dataio`]: Bayer packing, image and tensor files, datasets and crops.
//! - [`moiresynth`]: screen-capture simulator producing paired training data.
//! - [`nnblocks`]: DCAB, channel attention, GFM, FSM and a windowed-attention
//!   reconstruction block.
//! - [`architecture`]: the full two-branch network, its ablation variants,
//!   joint L1 loss and checkpoints.
//! - [`train_eval`]: AdamW, learning-rate schedule, training loop, PSNR/SSIM.

pub mod architecture;
pub mod dataio;
mod error;
pub mod frequency;
pub mod moiresynth;
pub mod nnblocks;
pub mod tensorkernels;
pub mod train_eval;

pub use error::{Error, Result};
pub use tensorkernels::{ParamStore, Scalar, Tape, Tensor, Var};
