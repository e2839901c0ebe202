use crate::dataio::{PackedRaw, SrgbImage};
use crate::error::{shape_err, Result};
use crate::nnblocks::{Builder, Conv2d, Init, ResBlock, Rstb};
use crate::tensorkernels::{ConvGeom, Differentiable, ParamStore, Scalar, Tape, Tensor, Var};

use super::config::{ModelConfig, Variant};
use super::rgisp::Rgisp;
use super::scdm::{Block, Scdm, SkipKind};

/// Shallow extractor plus SCDM for one input domain.
#[derive(Clone, Debug)]
pub struct Branch {
    pub shallow: Conv2d,
    /// Stride-2 convolution bringing sRGB features to the packed-RAW grid.
    pub down: Option<Conv2d>,
    pub shallow_block: Block,
    pub scdm: Scdm,
}

impl Branch {
    fn new(b: &mut Builder, name: &str, cfg: &ModelConfig, cin: usize, down: bool, skip: SkipKind) -> Result<Self> {
        let c = cfg.base_channels;
        let plain = cfg.variant == Variant::S6;
        let shallow = b.conv_same(&format!("{name}.shallow"), cin, c, 3)?;
        let down = down
            .then(|| b.conv(&format!("{name}.down"), c, c, 3, ConvGeom::same(3, 1).with_stride(2), true, Init::FanIn(0)))
            .transpose()?;
        let shallow_block = Block::new(b, &format!("{name}.shallow_block"), cfg, c, plain)?;
        let scdm = Scdm::new(b, &format!("{name}.scdm"), cfg, skip, plain)?;
        Ok(Self { shallow, down, shallow_block, scdm })
    }

    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        let mut z = self.shallow.forward(tape, ps, x)?;
        if let Some(d) = &self.down {
            z = d.forward(tape, ps, z)?;
        }
        let z = self.shallow_block.forward(tape, ps, z)?;
        self.scdm.forward(tape, ps, z)
    }
}

/// How RAW and sRGB features are combined before reconstruction.
#[derive(Clone, Debug)]
pub enum Fusion {
    /// RAW-guided channel mixing of the sRGB features.
    Rgisp(Rgisp),
    /// Only the sRGB branch exists.
    RgbOnly,
    /// Only the RAW branch exists.
    RawOnly,
    /// `conv(relu(conv([raw, rgb])))`.
    Concat { conv1: Conv2d, conv2: Conv2d },
    /// Channel self-attention over `[raw, rgb]`, then a 1×1 fuse.
    JointAttention { attn: Rgisp, fuse: Conv2d },
    /// `[attn(raw), rgb]` fused by a 1×1 convolution.
    RawAttention { attn: Rgisp, fuse: Conv2d },
    /// `[map(raw), rgb]` fused by a 1×1 convolution, `map` a residual conv block.
    ConvMapping { map: ResBlock, fuse: Conv2d },
}

#[derive(Clone, Debug)]
pub enum Reconstruction {
    Rstb(Vec<Rstb>),
    Convs(Vec<ResBlock>),
}

/// Structure of the two-branch network; parameters live in a separate store.
#[derive(Clone, Debug)]
pub struct Network {
    pub variant: Variant,
    pub raw: Option<Branch>,
    pub rgb: Option<Branch>,
    pub fusion: Fusion,
    pub reconstruction: Reconstruction,
    pub raw_head: Option<Conv2d>,
    pub rgb_head: Conv2d,
}

/// Network outputs before clamping.
#[derive(Clone, Copy, Debug)]
pub struct Outputs {
    pub rgb: Var,
    pub raw: Var,
}

impl Network {
    fn new(b: &mut Builder, cfg: &ModelConfig) -> Result<Self> {
        use Variant as V;
        let v = cfg.variant;
        let c = cfg.base_channels;
        let (raw_skip, rgb_skip) = match v {
            V::S1 => (SkipKind::Identity, SkipKind::Identity),
            V::S2 => (SkipKind::Identity, SkipKind::Fsm),
            V::S3 => (SkipKind::Gfm, SkipKind::Identity),
            V::S4 => (SkipKind::Gfm, SkipKind::Gfm),
            V::S5 => (SkipKind::Fsm, SkipKind::Fsm),
            _ => (SkipKind::Gfm, SkipKind::Fsm),
        };
        let raw_cin = if v == V::B3 { 12 } else { 4 };
        let raw = (v != V::B1).then(|| Branch::new(b, "raw", cfg, raw_cin, false, raw_skip)).transpose()?;
        let rgb = (v != V::B2).then(|| Branch::new(b, "rgb", cfg, 3, true, rgb_skip)).transpose()?;
        let pw = ConvGeom::default();
        let fusion = match v {
            V::B1 => Fusion::RgbOnly,
            V::B2 => Fusion::RawOnly,
            V::B4 => Fusion::Concat {
                conv1: b.conv_same("fusion.conv1", 2 * c, c, 3)?,
                conv2: b.conv_same("fusion.conv2", c, c, 3)?,
            },
            V::R1 => Fusion::JointAttention {
                attn: Rgisp::new(b, "fusion.attn", 2 * c, cfg.lambda_policy)?,
                fuse: b.conv("fusion.fuse", 2 * c, c, 1, pw, true, Init::FanIn(0))?,
            },
            V::R2 => Fusion::RawAttention {
                attn: Rgisp::new(b, "fusion.attn", c, cfg.lambda_policy)?,
                fuse: b.conv("fusion.fuse", 2 * c, c, 1, pw, true, Init::FanIn(0))?,
            },
            V::R3 => Fusion::ConvMapping {
                map: ResBlock::new(b, "fusion.map", c)?,
                fuse: b.conv("fusion.fuse", 2 * c, c, 1, pw, true, Init::FanIn(0))?,
            },
            _ => Fusion::Rgisp(Rgisp::new(b, "rgisp", c, cfg.lambda_policy)?),
        };
        let reconstruction = if v == V::B5 {
            Reconstruction::Convs(vec![ResBlock::new(b, "recon.convs", c)?])
        } else if cfg.use_rstb {
            let bc = cfg.blocks.with_channels(c);
            Reconstruction::Rstb((0..cfg.rstb_count).map(|i| Rstb::new(b, &format!("recon.rstb{i}"), &bc)).collect::<Result<_>>()?)
        } else {
            Reconstruction::Convs((0..cfg.rstb_count.max(1)).map(|i| ResBlock::new(b, &format!("recon.res{i}"), c)).collect::<Result<_>>()?)
        };
        let raw_head = raw.is_some().then(|| b.conv_zero("raw_head", c, 4, 3)).transpose()?;
        let rgb_head = b.conv_zero("rgb_head", c, 12, 3)?;
        Ok(Self { variant: v, raw, rgb, fusion, reconstruction, raw_head, rgb_head })
    }

    /// `rgb` is `3×H×W`, `raw` is `4×(H/2)×(W/2)`, `H` and `W` divisible by 8.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, rgb: Var, raw: Var) -> Result<Outputs> {
        let (c3, h, w) = tape.value(rgb).chw("rrid_forward")?;
        if c3 != 3 || h % 8 != 0 || w % 8 != 0 {
            return shape_err("rrid_forward", format!("sRGB input must be 3×H×W with H, W divisible by 8, got {:?}", tape.dims(rgb)));
        }
        if tape.dims(raw) != [4, h / 2, w / 2] {
            return shape_err("rrid_forward", format!("RAW input must be [4, {}, {}], got {:?}", h / 2, w / 2, tape.dims(raw)));
        }
        let raw_in = if self.variant == Variant::B3 { tape.pixel_unshuffle(rgb, 2)? } else { raw };
        let d_raw = self.raw.as_ref().map(|br| br.forward(tape, ps, raw_in)).transpose()?;
        let d_rgb = self.rgb.as_ref().map(|br| br.forward(tape, ps, rgb)).transpose()?;

        let d_out = match (&self.fusion, d_raw, d_rgb) {
            (Fusion::RgbOnly, _, Some(g)) => g,
            (Fusion::RawOnly, Some(r), _) => r,
            (Fusion::Rgisp(m), Some(r), Some(g)) => m.forward(tape, ps, r, g)?,
            (Fusion::Concat { conv1, conv2 }, Some(r), Some(g)) => {
                let z = tape.concat(&[r, g])?;
                let z = conv1.forward(tape, ps, z)?;
                let z = tape.relu(z);
                conv2.forward(tape, ps, z)?
            }
            (Fusion::JointAttention { attn, fuse }, Some(r), Some(g)) => {
                let z = tape.concat(&[r, g])?;
                let z = attn.forward(tape, ps, z, z)?;
                fuse.forward(tape, ps, z)?
            }
            (Fusion::RawAttention { attn, fuse }, Some(r), Some(g)) => {
                let a = attn.forward(tape, ps, r, r)?;
                let z = tape.concat(&[a, g])?;
                fuse.forward(tape, ps, z)?
            }
            (Fusion::ConvMapping { map, fuse }, Some(r), Some(g)) => {
                let a = map.forward(tape, ps, r)?;
                let z = tape.concat(&[a, g])?;
                fuse.forward(tape, ps, z)?
            }
            _ => unreachable!("fusion kind always matches the branches built for the variant"),
        };

        let mut z = d_out;
        match &self.reconstruction {
            Reconstruction::Rstb(blocks) => {
                for blk in blocks {
                    z = blk.forward(tape, ps, z)?;
                }
            }
            Reconstruction::Convs(blocks) => {
                for blk in blocks {
                    z = blk.forward(tape, ps, z)?;
                }
            }
        }
        let y = self.rgb_head.forward(tape, ps, z)?;
        let mut y_rgb = tape.pixel_shuffle(y, 2)?;
        if self.rgb.is_some() {
            y_rgb = tape.add(y_rgb, rgb)?;
        }

        let y_raw = match (&self.raw_head, d_raw) {
            (Some(head), Some(d)) => {
                let y = head.forward(tape, ps, d)?;
                if self.variant == Variant::B3 { y } else { tape.add(y, raw)? }
            }
            // Without a RAW branch the RAW output is the input itself.
            _ => raw,
        };
        Ok(Outputs { rgb: y_rgb, raw: y_raw })
    }
}

/// Both outputs flattened and concatenated, for finite-difference checks.
impl Differentiable for Network {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, inputs: &[Var]) -> Result<Var> {
        let out = self.forward(tape, ps, inputs[0], inputs[1])?;
        let a = tape.value(out.rgb).numel();
        let b = tape.value(out.raw).numel();
        let a = tape.reshape(out.rgb, &[a])?;
        let b = tape.reshape(out.raw, &[b])?;
        tape.concat(&[a, b])
    }
}

/// The two-branch demoiréing network with all of its parameters.
#[derive(Clone, Debug)]
pub struct RridModel {
    pub config: ModelConfig,
    pub params: ParamStore<f32>,
    pub net: Network,
}

/// Builds a model with parameters drawn deterministically from `seed`.
pub fn build_model(cfg: &ModelConfig, seed: u64) -> Result<RridModel> {
    cfg.validate()?;
    let mut params = ParamStore::new();
    let net = Network::new(&mut Builder::new(&mut params, seed), cfg)?;
    Ok(RridModel { config: cfg.clone(), params, net })
}

impl RridModel {
    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.names().map(str::to_string).collect()
    }

    /// Unclamped outputs `(Ŷ_rgb, Ŷ_raw)` for raw tensors, at any precision.
    pub fn forward_tensors<T: Scalar>(&self, ps: &ParamStore<T>, rgb: &Tensor<T>, raw: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let mut tape = Tape::new();
        let (r, p) = (tape.input(rgb.clone()), tape.input(raw.clone()));
        let out = self.net.forward(&mut tape, ps, r, p)?;
        Ok((tape.value(out.rgb).clone(), tape.value(out.raw).clone()))
    }

    /// Inference: outputs clamped into `[0, 1]`.
    pub fn infer(&self, rgb: &SrgbImage, raw: &PackedRaw) -> Result<(SrgbImage, PackedRaw)> {
        let (y, r) = self.forward_tensors(&self.params, rgb.tensor(), raw.tensor())?;
        let clamp = |t: Tensor<f32>| t.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
        Ok((SrgbImage::new(clamp(y))?, PackedRaw::new(clamp(r))?))
    }
}
