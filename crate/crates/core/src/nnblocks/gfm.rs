use super::layers::{Builder, Conv2d, Init};
use super::BlockConfig;
use crate::error::Result;
use crate::tensorkernels::{ConvGeom, Differentiable, ParamStore, Scalar, Tape, Var};

/// Gated feedback module.
///
/// `t = DConv(PConv(x))` is split along channels into `gate` and `content`
/// (width `e·C` each); the output is `PConv₂(content ⊙ GELU(gate) + x')`
/// with `x'` the input lifted to width `e·C` (identity when `e = 1`).
#[derive(Clone, Debug)]
pub struct Gfm {
    pub pconv: Conv2d,
    pub dconv: Conv2d,
    pub lift: Option<Conv2d>,
    pub pconv2: Conv2d,
    pub width: usize,
}

impl Gfm {
    /// The content half of the depth-wise kernel and bias start at zero and
    /// `PConv₂` starts as the identity, so the module is initially the identity
    /// while the gate half still receives gradient.
    pub fn new(b: &mut Builder, name: &str, cfg: &BlockConfig) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.channels;
        let width = cfg.gfm_expansion * c;
        let pw = ConvGeom::default();
        let pconv = b.conv(&format!("{name}.pconv"), c, 2 * width, 1, pw, true, Init::FanIn(0))?;
        let dconv = b.conv(
            &format!("{name}.dconv"),
            2 * width,
            2 * width,
            3,
            ConvGeom::same(3, 1).with_groups(2 * width),
            true,
            Init::FanIn(0),
        )?;
        for id in [Some(dconv.weight), dconv.bias].into_iter().flatten() {
            let p = b.store_mut().get_mut(id);
            let half = p.value.numel() / 2;
            p.value.data_mut()[half..].iter_mut().for_each(|v| *v = 0.0);
        }
        let lift = (width != c).then(|| b.conv(&format!("{name}.lift"), c, width, 1, pw, false, Init::Eye)).transpose()?;
        let pconv2 = b.conv(&format!("{name}.pconv2"), width, c, 1, pw, true, Init::Eye)?;
        Ok(Self { pconv, dconv, lift, pconv2, width })
    }

    /// Gate pre-activations and content features.
    pub fn split<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<(Var, Var)> {
        let t = self.pconv.forward(tape, ps, x)?;
        let t = self.dconv.forward(tape, ps, t)?;
        Ok((tape.narrow(t, 0, self.width)?, tape.narrow(t, self.width, self.width)?))
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        let (gate, content) = self.split(tape, ps, x)?;
        let gate = tape.gelu(gate);
        let gated = tape.mul(content, gate)?;
        let skip = match &self.lift {
            Some(l) => l.forward(tape, ps, x)?,
            None => x,
        };
        let z = tape.add(gated, skip)?;
        self.pconv2.forward(tape, ps, z)
    }
}

impl Differentiable for Gfm {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, inputs: &[Var]) -> Result<Var> {
        self.forward(tape, ps, inputs[0])
    }
}
