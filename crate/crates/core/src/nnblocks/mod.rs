//! Network building blocks. Each block registers its parameters in a
//! [`ParamStore`](crate::ParamStore) under a name prefix and records its
//! forward pass on a [`Tape`](crate::Tape). Every block maps `C×h×w` to
//! `C×h×w` and starts out as the identity: the last layer of each residual
//! branch is zero-initialized.

mod attention;
mod dcab;
mod fsm;
mod gfm;
mod layers;
mod rstb;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use attention::{attention_probabilities, window_attention, AttentionLayout, ChannelAttention};
pub use dcab::{Dcab, ResBlock};
pub use fsm::Fsm;
pub use gfm::Gfm;
pub use layers::{randomize_params, Builder, Conv2d, Init, LayerNorm, Linear};
pub use rstb::Rstb;

/// Structural hyperparameters shared by the blocks of one width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlockConfig {
    pub channels: usize,
    pub dcab_dilations: Vec<usize>,
    pub ca_reduction: usize,
    pub gfm_expansion: usize,
    pub fsm_filter_layers: usize,
    pub rstb_window: usize,
    pub rstb_heads: usize,
    pub rstb_mlp_ratio: usize,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            channels: 8,
            dcab_dilations: vec![1, 2, 3],
            ca_reduction: 4,
            gfm_expansion: 1,
            fsm_filter_layers: 2,
            rstb_window: 8,
            rstb_heads: 2,
            rstb_mlp_ratio: 2,
        }
    }
}

impl BlockConfig {
    pub fn with_channels(&self, channels: usize) -> Self {
        Self { channels, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let c = self.channels;
        if c == 0 {
            return bad("channels must be positive".into());
        }
        if self.dcab_dilations.is_empty() || self.dcab_dilations.contains(&0) {
            return bad(format!("dcab_dilations must be non-empty and positive, got {:?}", self.dcab_dilations));
        }
        if self.ca_reduction == 0 || !c.is_multiple_of(self.ca_reduction) {
            return bad(format!("ca_reduction {} must divide channels {c}", self.ca_reduction));
        }
        if self.rstb_heads == 0 || !c.is_multiple_of(self.rstb_heads) {
            return bad(format!("channels {c} must be divisible by rstb_heads {}", self.rstb_heads));
        }
        if self.gfm_expansion == 0 || self.fsm_filter_layers == 0 || self.rstb_window == 0 || self.rstb_mlp_ratio == 0 {
            return bad("gfm_expansion, fsm_filter_layers, rstb_window and rstb_mlp_ratio must be positive".into());
        }
        Ok(())
    }
}
