use super::layers::{Builder, Conv2d, Init};
use crate::error::{shape_err, Result};
use crate::tensorkernels::{ConvGeom, Differentiable, ParamStore, Scalar, Tape, Tensor, Var};

/// Squeeze-and-excitation channel attention: `x ⊙ σ(W₂·relu(W₁·avgpool(x)))`.
#[derive(Clone, Debug)]
pub struct ChannelAttention {
    pub squeeze: Conv2d,
    pub excite: Conv2d,
}

impl ChannelAttention {
    pub fn new(b: &mut Builder, name: &str, channels: usize, reduction: usize) -> Result<Self> {
        let hidden = (channels / reduction).max(1);
        let pw = ConvGeom::default();
        Ok(Self {
            squeeze: b.conv(&format!("{name}.squeeze"), channels, hidden, 1, pw, true, Init::FanIn(0))?,
            excite: b.conv(&format!("{name}.excite"), hidden, channels, 1, pw, true, Init::FanIn(0))?,
        })
    }

    /// Per-channel scales in `(0, 1)`, as a `C×1×1` variable.
    pub fn scales<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        let c = tape.dims(x)[0];
        let pooled = tape.global_avg_pool(x)?;
        let pooled = tape.reshape(pooled, &[c, 1, 1])?;
        let z = self.squeeze.forward(tape, ps, pooled)?;
        let z = tape.relu(z);
        let z = self.excite.forward(tape, ps, z)?;
        Ok(tape.sigmoid(z))
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        let s = self.scales(tape, ps, x)?;
        tape.mul_channels(x, s)
    }
}

impl Differentiable for ChannelAttention {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, inputs: &[Var]) -> Result<Var> {
        self.forward(tape, ps, inputs[0])
    }
}

/// Geometry of packed window attention: rows of the `N×3C` input are tokens
/// grouped window by window (`tokens` per window); columns hold `[Q | K | V]`,
/// each split into `heads` contiguous slices.
#[derive(Clone, Copy, Debug)]
pub struct AttentionLayout {
    pub tokens: usize,
    pub heads: usize,
    pub channels: usize,
}

impl AttentionLayout {
    fn check<T: Scalar>(&self, qkv: &Tensor<T>) -> Result<usize> {
        let (n, cols) = qkv.rc("window_attention")?;
        if cols != 3 * self.channels || self.heads == 0 || !self.channels.is_multiple_of(self.heads) || self.tokens == 0 || n % self.tokens != 0 {
            return shape_err(
                "window_attention",
                format!("{n}×{cols} input does not match {} tokens, {} heads, {} channels", self.tokens, self.heads, self.channels),
            );
        }
        Ok(n / self.tokens)
    }

    fn head_dim(&self) -> usize {
        self.channels / self.heads
    }
}

/// Softmax attention probabilities `P = softmax(Q·Kᵀ/√d)` of one window and
/// head, as a row-major `tokens×tokens` matrix.
fn probabilities<T: Scalar>(qkv: &[T], lay: AttentionLayout, window: usize, head: usize) -> Vec<T> {
    let (t, c, d) = (lay.tokens, lay.channels, lay.head_dim());
    let row = |i: usize| &qkv[(window * t + i) * 3 * c..(window * t + i + 1) * 3 * c];
    let scale = T::lit(1.0 / (d as f64).sqrt());
    let mut p = vec![T::zero(); t * t];
    for i in 0..t {
        let q = &row(i)[head * d..(head + 1) * d];
        let mut max = T::neg_infinity();
        for j in 0..t {
            let k = &row(j)[c + head * d..c + (head + 1) * d];
            let s = q.iter().zip(k).map(|(&a, &b)| a * b).sum::<T>() * scale;
            p[i * t + j] = s;
            max = max.max(s);
        }
        let mut total = T::zero();
        for v in &mut p[i * t..(i + 1) * t] {
            *v = (*v - max).exp();
            total = total + *v;
        }
        p[i * t..(i + 1) * t].iter_mut().for_each(|v| *v = *v / total);
    }
    p
}

/// All attention probability matrices, indexed `[window][head]`.
pub fn attention_probabilities<T: Scalar>(qkv: &Tensor<T>, lay: AttentionLayout) -> Result<Vec<Vec<Vec<T>>>> {
    let windows = lay.check(qkv)?;
    Ok((0..windows)
        .map(|w| (0..lay.heads).map(|h| probabilities(qkv.data(), lay, w, h)).collect())
        .collect())
}

fn attention_forward<T: Scalar>(qkv: &Tensor<T>, lay: AttentionLayout) -> Result<Tensor<T>> {
    let windows = lay.check(qkv)?;
    let (t, c, d) = (lay.tokens, lay.channels, lay.head_dim());
    let x = qkv.data();
    let mut out = vec![T::zero(); windows * t * c];
    for w in 0..windows {
        for h in 0..lay.heads {
            let p = probabilities(x, lay, w, h);
            for i in 0..t {
                let o = &mut out[(w * t + i) * c + h * d..(w * t + i) * c + (h + 1) * d];
                for j in 0..t {
                    let pij = p[i * t + j];
                    let v = &x[(w * t + j) * 3 * c + 2 * c + h * d..(w * t + j) * 3 * c + 2 * c + (h + 1) * d];
                    o.iter_mut().zip(v).for_each(|(a, &b)| *a = *a + pij * b);
                }
            }
        }
    }
    Tensor::new(vec![windows * t, c], out)
}

/// Backward of [`attention_forward`]: with `O = P·V` and `S = Q·Kᵀ/√d`,
/// `dV = Pᵀ·dO`, `dS = P ⊙ (dP − rowsum(dP ⊙ P))`, `dQ = dS·K/√d`, `dK = dSᵀ·Q/√d`.
fn attention_backward<T: Scalar>(qkv: &Tensor<T>, dy: &Tensor<T>, lay: AttentionLayout) -> Result<Tensor<T>> {
    let windows = lay.check(qkv)?;
    let (t, c, d) = (lay.tokens, lay.channels, lay.head_dim());
    let x = qkv.data();
    let g = dy.data();
    let scale = T::lit(1.0 / (d as f64).sqrt());
    let mut dx = vec![T::zero(); x.len()];
    let at = |tok: usize, part: usize, h: usize| (tok * 3 + part) * c + h * d;
    let mut ds = vec![T::zero(); t * t];
    for w in 0..windows {
        for h in 0..lay.heads {
            let p = probabilities(x, lay, w, h);
            for i in 0..t {
                let go = &g[(w * t + i) * c + h * d..(w * t + i) * c + (h + 1) * d];
                let mut dot = T::zero();
                for j in 0..t {
                    let v = &x[at(w * t + j, 2, h)..at(w * t + j, 2, h) + d];
                    let dp = go.iter().zip(v).map(|(&a, &b)| a * b).sum::<T>();
                    ds[i * t + j] = dp;
                    dot = dot + dp * p[i * t + j];
                    // dV_j += P_ij · dO_i
                    let base = at(w * t + j, 2, h);
                    for (k, &gk) in go.iter().enumerate() {
                        dx[base + k] = dx[base + k] + p[i * t + j] * gk;
                    }
                }
                for j in 0..t {
                    ds[i * t + j] = p[i * t + j] * (ds[i * t + j] - dot) * scale;
                }
            }
            for i in 0..t {
                for j in 0..t {
                    let s = ds[i * t + j];
                    let (qi, kj) = (at(w * t + i, 0, h), at(w * t + j, 1, h));
                    for k in 0..d {
                        dx[qi + k] = dx[qi + k] + s * x[kj + k];
                        dx[kj + k] = dx[kj + k] + s * x[qi + k];
                    }
                }
            }
        }
    }
    Tensor::new(qkv.dims().to_vec(), dx)
}

/// Multi-head self-attention inside each window, recorded as one tape node.
pub fn window_attention<T: Scalar>(tape: &mut Tape<T>, qkv: Var, lay: AttentionLayout) -> Result<Var> {
    let y = attention_forward(tape.value(qkv), lay)?;
    Ok(tape.custom("window_attention", y, &[qkv], move |inp, _, dy, _| {
        Ok(vec![Some(attention_backward(inp[0], dy, lay)?)])
    }))
}
