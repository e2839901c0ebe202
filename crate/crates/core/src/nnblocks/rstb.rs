use std::rc::Rc;

use super::attention::{window_attention, AttentionLayout};
use super::layers::{Builder, Conv2d, Init, LayerNorm, Linear};
use super::BlockConfig;
use crate::error::Result;
use crate::tensorkernels::{Differentiable, ParamStore, Scalar, Tape, Var};

/// Simplified residual transformer block: one windowed multi-head
/// self-attention layer and one MLP layer (pre-norm, each residual), then a
/// 3×3 convolution with an outer residual. Inputs are reflect-padded to a
/// multiple of the window and cropped back.
#[derive(Clone, Debug)]
pub struct Rstb {
    pub norm1: LayerNorm,
    pub qkv: Linear,
    pub proj: Linear,
    pub norm2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
    pub conv: Conv2d,
    pub window: usize,
    pub heads: usize,
}

/// Flat source index of every token-matrix entry: rows are tokens ordered
/// window by window (raster order inside a window), columns are channels.
fn token_index(c: usize, h: usize, w: usize, win: usize) -> Vec<usize> {
    let mut idx = Vec::with_capacity(c * h * w);
    for wy in (0..h).step_by(win) {
        for wx in (0..w).step_by(win) {
            for y in wy..wy + win {
                for x in wx..wx + win {
                    idx.extend((0..c).map(|ch| (ch * h + y) * w + x));
                }
            }
        }
    }
    idx
}

impl Rstb {
    pub fn new(b: &mut Builder, name: &str, cfg: &BlockConfig) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.channels;
        let hidden = cfg.rstb_mlp_ratio * c;
        Ok(Self {
            norm1: b.layer_norm(&format!("{name}.norm1"), c)?,
            qkv: b.linear(&format!("{name}.qkv"), c, 3 * c, Init::FanIn(0))?,
            proj: b.linear(&format!("{name}.proj"), c, c, Init::Zeros)?,
            norm2: b.layer_norm(&format!("{name}.norm2"), c)?,
            fc1: b.linear(&format!("{name}.fc1"), c, hidden, Init::FanIn(0))?,
            fc2: b.linear(&format!("{name}.fc2"), hidden, c, Init::Zeros)?,
            conv: b.conv_zero(&format!("{name}.conv"), c, c, 3)?,
            window: cfg.rstb_window,
            heads: cfg.rstb_heads,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        let (c, h, w) = tape.value(x).chw("rstb")?;
        let win = self.window;
        let padded = tape.pad_reflect(x, (win - h % win) % win, (win - w % win) % win)?;
        let (ph, pw) = (tape.dims(padded)[1], tape.dims(padded)[2]);
        let n = ph * pw;

        let to_tokens = Rc::new(token_index(c, ph, pw, win));
        let mut from_tokens = vec![0; to_tokens.len()];
        for (k, &src) in to_tokens.iter().enumerate() {
            from_tokens[src] = k;
        }
        let tokens = tape.gather(padded, &[n, c], to_tokens)?;

        let lay = AttentionLayout { tokens: win * win, heads: self.heads, channels: c };
        let u = self.norm1.forward(tape, ps, tokens)?;
        let qkv = self.qkv.forward(tape, ps, u)?;
        let attn = window_attention(tape, qkv, lay)?;
        let attn = self.proj.forward(tape, ps, attn)?;
        let t1 = tape.add(tokens, attn)?;

        let u = self.norm2.forward(tape, ps, t1)?;
        let u = self.fc1.forward(tape, ps, u)?;
        let u = tape.gelu(u);
        let u = self.fc2.forward(tape, ps, u)?;
        let t2 = tape.add(t1, u)?;

        let z = tape.gather(t2, &[c, ph, pw], Rc::new(from_tokens))?;
        let z = tape.crop(z, h, w)?;
        let z = self.conv.forward(tape, ps, z)?;
        tape.add(x, z)
    }
}

impl Differentiable for Rstb {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, inputs: &[Var]) -> Result<Var> {
        self.forward(tape, ps, inputs[0])
    }
}
