use crate::error::{shape_err, Result};
use crate::frequency::DctPlan;
use crate::nnblocks::{Builder, Conv2d, Dcab, Fsm, Gfm, Init, ResBlock};
use crate::tensorkernels::{ConvGeom, Differentiable, ParamStore, Scalar, Tape, Var};

use super::config::ModelConfig;

/// Feature block used at every encoder/decoder position.
#[derive(Clone, Debug)]
pub enum Block {
    Dcab(Dcab),
    Res(ResBlock),
}

impl Block {
    pub fn new(b: &mut Builder, name: &str, cfg: &ModelConfig, channels: usize, plain: bool) -> Result<Self> {
        Ok(if plain {
            Block::Res(ResBlock::new(b, name, channels)?)
        } else {
            Block::Dcab(Dcab::new(b, name, &cfg.blocks.with_channels(channels))?)
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        match self {
            Block::Dcab(d) => d.forward(tape, ps, x),
            Block::Res(r) => r.forward(tape, ps, x),
        }
    }
}

/// Which module filters the encoder features on their way to the decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkipKind {
    Identity,
    Gfm,
    Fsm,
}

#[derive(Clone, Debug)]
pub enum Skip {
    Identity,
    Gfm(Gfm),
    Fsm(Fsm),
}

impl Skip {
    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        match self {
            Skip::Identity => Ok(x),
            Skip::Gfm(g) => g.forward(tape, ps, x),
            Skip::Fsm(f) => f.forward(tape, ps, x),
        }
    }
}

fn stack<T: Scalar>(blocks: &[Block], tape: &mut Tape<T>, ps: &ParamStore<T>, mut x: Var) -> Result<Var> {
    for blk in blocks {
        x = blk.forward(tape, ps, x)?;
    }
    Ok(x)
}

/// Two-level U-shaped encoder/decoder with filtered skip connections.
///
/// Level `l` runs at `1/2ˡ` of the input resolution with `C·gˡ` channels.
/// Decoder levels up-sample with a 3×3 convolution and pixel shuffle and add
/// the filtered skip. The finest up-sampling convolution starts at zero, so
/// at initialization the output equals the input.
#[derive(Clone, Debug)]
pub struct Scdm {
    pub enc: Vec<Vec<Block>>,
    pub skips: Vec<Skip>,
    pub downs: Vec<Conv2d>,
    pub bottleneck: Vec<Block>,
    pub ups: Vec<Conv2d>,
    pub dec: Vec<Vec<Block>>,
}

impl Scdm {
    pub fn new(b: &mut Builder, name: &str, cfg: &ModelConfig, skip: SkipKind, plain: bool) -> Result<Self> {
        cfg.validate()?;
        let levels = cfg.scales - 1;
        let plan = DctPlan::new(cfg.dct_block)?;
        let blocks = |b: &mut Builder, tag: String, c: usize, n: usize| -> Result<Vec<Block>> {
            (0..n).map(|i| Block::new(b, &format!("{tag}.{i}"), cfg, c, plain)).collect()
        };
        let (mut enc, mut skips, mut downs, mut ups, mut dec) = (vec![], vec![], vec![], vec![], vec![]);
        for l in 0..levels {
            let (c, c_next) = (cfg.width(l), cfg.width(l + 1));
            enc.push(blocks(b, format!("{name}.enc{l}"), c, cfg.dcabs_per_scale)?);
            let bc = cfg.blocks.with_channels(c);
            skips.push(match skip {
                SkipKind::Identity => Skip::Identity,
                SkipKind::Gfm => Skip::Gfm(Gfm::new(b, &format!("{name}.skip{l}.gfm"), &bc)?),
                SkipKind::Fsm => Skip::Fsm(Fsm::new(b, &format!("{name}.skip{l}.fsm"), &bc, &plan)?),
            });
            let down = ConvGeom::same(3, 1).with_stride(2);
            downs.push(b.conv(&format!("{name}.down{l}"), c, c_next, 3, down, true, Init::FanIn(0))?);
            let init = if l == 0 { Init::Zeros } else { Init::FanIn(0) };
            ups.push(b.conv(&format!("{name}.up{l}"), c_next, 4 * c, 3, ConvGeom::same(3, 1), true, init)?);
            dec.push(blocks(b, format!("{name}.dec{l}"), c, cfg.dcabs_per_scale)?);
        }
        let bottleneck = blocks(b, format!("{name}.bottleneck"), cfg.width(levels), cfg.bottleneck_dcabs)?;
        Ok(Self { enc, skips, downs, bottleneck, ups, dec })
    }

    /// Input `h` and `w` must be divisible by `2^levels`.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        let (_, h, w) = tape.value(x).chw("scdm")?;
        let m = 1 << self.downs.len();
        if h % m != 0 || w % m != 0 {
            return shape_err("scdm", format!("spatial dims {h}×{w} must be divisible by {m}"));
        }
        let mut taps = Vec::with_capacity(self.downs.len());
        let mut z = x;
        for l in 0..self.downs.len() {
            z = stack(&self.enc[l], tape, ps, z)?;
            taps.push(self.skips[l].forward(tape, ps, z)?);
            z = self.downs[l].forward(tape, ps, z)?;
        }
        z = stack(&self.bottleneck, tape, ps, z)?;
        for l in (0..self.downs.len()).rev() {
            z = self.ups[l].forward(tape, ps, z)?;
            z = tape.pixel_shuffle(z, 2)?;
            z = tape.add(z, taps[l])?;
            z = stack(&self.dec[l], tape, ps, z)?;
        }
        Ok(z)
    }
}

impl Differentiable for Scdm {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, inputs: &[Var]) -> Result<Var> {
        self.forward(tape, ps, inputs[0])
    }
}
