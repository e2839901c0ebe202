use super::attention::ChannelAttention;
use super::layers::{Builder, Conv2d, Init};
use super::BlockConfig;
use crate::error::Result;
use crate::tensorkernels::{ConvGeom, Differentiable, ParamStore, Scalar, Tape, Var};

/// Dilated channel-attention block:
/// `x + CA(conv_dₙ(relu(… relu(conv_d₁(x)))))`, all convolutions 3×3 same-size.
#[derive(Clone, Debug)]
pub struct Dcab {
    pub convs: Vec<Conv2d>,
    pub ca: ChannelAttention,
}

impl Dcab {
    pub fn new(b: &mut Builder, name: &str, cfg: &BlockConfig) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.channels;
        let last = cfg.dcab_dilations.len() - 1;
        let convs = cfg
            .dcab_dilations
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let init = if i == last { Init::Zeros } else { Init::FanIn(0) };
                b.conv(&format!("{name}.conv{}", i + 1), c, c, 3, ConvGeom::same(3, d), true, init)
            })
            .collect::<Result<_>>()?;
        let ca = ChannelAttention::new(b, &format!("{name}.ca"), c, cfg.ca_reduction)?;
        Ok(Self { convs, ca })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        let mut z = x;
        for (i, conv) in self.convs.iter().enumerate() {
            if i > 0 {
                z = tape.relu(z);
            }
            z = conv.forward(tape, ps, z)?;
        }
        let z = self.ca.forward(tape, ps, z)?;
        tape.add(x, z)
    }
}

impl Differentiable for Dcab {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, inputs: &[Var]) -> Result<Var> {
        self.forward(tape, ps, inputs[0])
    }
}

/// Plain residual block `x + conv(relu(conv(x)))`, the DCAB replacement in ablations.
#[derive(Clone, Debug)]
pub struct ResBlock {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
}

impl ResBlock {
    pub fn new(b: &mut Builder, name: &str, channels: usize) -> Result<Self> {
        Ok(Self {
            conv1: b.conv_same(&format!("{name}.conv1"), channels, channels, 3)?,
            conv2: b.conv_zero(&format!("{name}.conv2"), channels, channels, 3)?,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        let z = self.conv1.forward(tape, ps, x)?;
        let z = tape.relu(z);
        let z = self.conv2.forward(tape, ps, z)?;
        tape.add(x, z)
    }
}
