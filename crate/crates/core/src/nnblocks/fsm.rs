use super::layers::{Builder, Conv2d, Init};
use super::BlockConfig;
use crate::error::Result;
use crate::frequency::{block_dct_var, DctPlan};
use crate::tensorkernels::{ConvGeom, Differentiable, ParamStore, Scalar, Tape, Var};

/// Frequency selective module: `IDCT(B(DCT(x)))` with a block DCT and a
/// learnable filter `B(c) = c + convₙ(relu(… conv₁(c)))` on the coefficient
/// maps. Inputs are reflect-padded up to the block size and cropped back.
#[derive(Clone, Debug)]
pub struct Fsm {
    pub plan: DctPlan,
    pub filter: Vec<Conv2d>,
}

impl Fsm {
    pub fn new(b: &mut Builder, name: &str, cfg: &BlockConfig, plan: &DctPlan) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.channels;
        let layers = cfg.fsm_filter_layers;
        let filter = (0..layers)
            .map(|i| {
                let init = if i + 1 == layers { Init::Zeros } else { Init::FanIn(0) };
                b.conv(&format!("{name}.filter{}", i + 1), c, c, 3, ConvGeom::same(3, 1), true, init)
            })
            .collect::<Result<_>>()?;
        Ok(Self { plan: plan.clone(), filter })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        let (_, h, w) = tape.value(x).chw("fsm")?;
        let n = self.plan.block_size();
        let padded = tape.pad_reflect(x, (n - h % n) % n, (n - w % n) % n)?;
        let coeffs = block_dct_var(tape, &self.plan, padded, false)?;
        let mut z = coeffs;
        for (i, conv) in self.filter.iter().enumerate() {
            if i > 0 {
                z = tape.relu(z);
            }
            z = conv.forward(tape, ps, z)?;
        }
        let filtered = tape.add(coeffs, z)?;
        let y = block_dct_var(tape, &self.plan, filtered, true)?;
        tape.crop(y, h, w)
    }
}

impl Differentiable for Fsm {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, inputs: &[Var]) -> Result<Var> {
        self.forward(tape, ps, inputs[0])
    }
}
