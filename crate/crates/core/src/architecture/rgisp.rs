use crate::error::{shape_err, Result};
use crate::nnblocks::{Builder, Conv2d, Init};
use crate::tensorkernels::{ConvGeom, Differentiable, ParamId, ParamStore, Scalar, Tape, Var};

use super::config::LambdaPolicy;

/// Channel-mixing attention guided by a second feature map.
///
/// `Q`, `K` are 1×1 projections of the guide and `V` a 1×1 projection of the
/// source, each flattened to `C×N`. The `C×C` matrix
/// `M = softmax(Q·Kᵀ / λ)` (rows normalised) mixes the channels of `V`, and
/// the result is refined by a depth-wise plus point-wise convolution with a
/// residual. With the RAW features as guide and the sRGB features as source
/// this is the RAW-guided ISP; with guide = source it is channel self-attention.
#[derive(Clone, Debug)]
pub struct Rgisp {
    pub q: Conv2d,
    pub k: Conv2d,
    pub v: Conv2d,
    pub dw: Conv2d,
    pub pw: Conv2d,
    /// Multiplier `s` of `λ = √N·s` under [`LambdaPolicy::Learnable`].
    pub lambda_scale: Option<ParamId>,
    pub channels: usize,
}

impl Rgisp {
    /// `V` starts as the identity projection and the refinement tail at zero,
    /// so the initial output is `M·D_src`.
    pub fn new(b: &mut Builder, name: &str, channels: usize, policy: LambdaPolicy) -> Result<Self> {
        let c = channels;
        let pw = ConvGeom::default();
        Ok(Self {
            q: b.conv(&format!("{name}.q"), c, c, 1, pw, true, Init::FanIn(0))?,
            k: b.conv(&format!("{name}.k"), c, c, 1, pw, true, Init::FanIn(0))?,
            v: b.conv(&format!("{name}.v"), c, c, 1, pw, true, Init::Eye)?,
            dw: b.conv(&format!("{name}.dw"), c, c, 3, ConvGeom::same(3, 1).with_groups(c), true, Init::FanIn(0))?,
            pw: b.conv(&format!("{name}.pw"), c, c, 1, pw, true, Init::Zeros)?,
            lambda_scale: match policy {
                LambdaPolicy::FixedSqrtN => None,
                LambdaPolicy::Learnable => Some(b.tensor(&format!("{name}.lambda_scale"), &[1], Init::Ones)?),
            },
            channels,
        })
    }

    fn check(&self, tape: &Tape<impl Scalar>, guide: Var, src: Var) -> Result<(usize, usize)> {
        let (c, h, w) = tape.value(guide).chw("rgisp")?;
        if tape.dims(src) != tape.dims(guide) {
            return shape_err("rgisp", format!("branch dims differ: {:?} vs {:?}", tape.dims(guide), tape.dims(src)));
        }
        if c != self.channels {
            return shape_err("rgisp", format!("expected {} channels, got {c}", self.channels));
        }
        Ok((h, w))
    }

    /// The `C×C` mixing matrix; every row sums to 1.
    pub fn mixing_matrix<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, guide: Var) -> Result<Var> {
        let (c, h, w) = tape.value(guide).chw("rgisp")?;
        let n = h * w;
        let q = self.q.forward(tape, ps, guide)?;
        let q = tape.reshape(q, &[c, n])?;
        let k = self.k.forward(tape, ps, guide)?;
        let k = tape.reshape(k, &[c, n])?;
        let logits = tape.matmul(q, k, false, true)?;
        let mut logits = tape.scale(logits, 1.0 / (n as f64).sqrt());
        if let Some(id) = self.lambda_scale {
            let s = tape.param(ps, id);
            logits = tape.div_scalar(logits, s)?;
        }
        tape.softmax(logits, 1)
    }

    /// `M·V` before refinement, `C×h×w`.
    pub fn mix<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, guide: Var, src: Var) -> Result<Var> {
        let (h, w) = self.check(tape, guide, src)?;
        let c = self.channels;
        let m = self.mixing_matrix(tape, ps, guide)?;
        let v = self.v.forward(tape, ps, src)?;
        let v = tape.reshape(v, &[c, h * w])?;
        let out = tape.matmul(m, v, false, false)?;
        tape.reshape(out, &[c, h, w])
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, guide: Var, src: Var) -> Result<Var> {
        let d = self.mix(tape, ps, guide, src)?;
        let r = self.dw.forward(tape, ps, d)?;
        let r = self.pw.forward(tape, ps, r)?;
        tape.add(d, r)
    }
}

impl Differentiable for Rgisp {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, inputs: &[Var]) -> Result<Var> {
        self.forward(tape, ps, inputs[0], inputs[1])
    }
}
