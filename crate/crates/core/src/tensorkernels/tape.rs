//! Reverse-mode autodiff over the fixed operator set.
//!
//! Each recorded node keeps its forward value; `backward` replays the nodes in
//! reverse with each operator's explicit gradient rule.

use std::rc::Rc;

use super::ops::{self, Activation, ConvGeom};
use super::{ParamId, ParamStore, Scalar, Tensor};
use crate::error::{shape_err, Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Gradient rule: `(parent values, output value, upstream grad, which parents need a grad)`.
pub type BackwardFn<T> =
    Box<dyn Fn(&[&Tensor<T>], &Tensor<T>, &Tensor<T>, &[bool]) -> Result<Vec<Option<Tensor<T>>>>>;

struct Node<T> {
    op: &'static str,
    value: Tensor<T>,
    parents: Vec<usize>,
    backward: Option<BackwardFn<T>>,
    requires_grad: bool,
}

pub struct Tape<T: Scalar = f32> {
    nodes: Vec<Node<T>>,
    params: Vec<(usize, ParamId)>,
    fault: Option<String>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar root with respect to every leaf that requires one.
pub struct Gradients<T> {
    leaves: Vec<Option<Tensor<T>>>,
    params: Vec<(usize, ParamId)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.leaves.get(v.0).and_then(|g| g.as_ref())
    }

    /// Parameter gradients in recording order. Unused parameters are skipped.
    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Tensor<T>)> {
        self.params
            .iter()
            .filter_map(|&(n, id)| self.leaves[n].as_ref().map(|g| (id, g)))
    }

    /// Adds `scale ·` every parameter gradient into `store`.
    pub fn accumulate_into(&self, store: &mut ParamStore<T>, scale: T) -> Result<()> {
        for (id, g) in self.params() {
            store.accumulate(id, g, scale)?;
        }
        Ok(())
    }

    pub fn into_param_grads(self) -> Vec<(ParamId, Tensor<T>)> {
        let mut leaves = self.leaves;
        self.params
            .iter()
            .filter_map(|&(n, id)| leaves[n].take().map(|g| (id, g)))
            .collect()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
            fault: None,
        }
    }

    /// Test fixture: perturbs the backward rule of every node named `op`.
    pub fn inject_fault(&mut self, op: impl Into<String>) {
        self.fault = Some(op.into());
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn dims(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.dims()
    }

    fn push_leaf(&mut self, op: &'static str, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            parents: Vec::new(),
            backward: None,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A constant input; no gradient is tracked for it.
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf("input", value, false)
    }

    /// An input whose gradient is wanted.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf("leaf", value, true)
    }

    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        let v = self.push_leaf("param", store.get(id).value.clone(), true);
        self.params.push((v.0, id));
        v
    }

    /// Records a node with a custom gradient rule.
    pub fn custom(
        &mut self,
        op: &'static str,
        value: Tensor<T>,
        parents: &[Var],
        backward: impl Fn(&[&Tensor<T>], &Tensor<T>, &Tensor<T>, &[bool]) -> Result<Vec<Option<Tensor<T>>>>
            + 'static,
    ) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            parents: parents.iter().map(|p| p.0).collect(),
            backward: requires_grad.then(|| Box::new(backward) as BackwardFn<T>),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Backpropagates from a one-element root.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        let dims = self.check_var(root)?.value.dims().to_vec();
        if self.nodes[root.0].value.numel() != 1 {
            return Err(Error::Tape(format!(
                "backward needs a scalar root or an explicit seed; root has dims {dims:?}"
            )));
        }
        self.backward_with(root, Tensor::full(dims, T::one()))
    }

    /// Backpropagates an explicit upstream gradient `seed` with the root's dims.
    pub fn backward_with(&self, root: Var, seed: Tensor<T>) -> Result<Gradients<T>> {
        let node = self.check_var(root)?;
        if seed.dims() != node.value.dims() {
            return Err(Error::Tape(format!(
                "seed gradient dims {:?} differ from forward output dims {:?}",
                seed.dims(),
                node.value.dims()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut leaves: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(seed);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let Some(bw) = node.backward.as_ref() else {
                if node.requires_grad {
                    leaves[i] = Some(g);
                }
                continue;
            };
            let inputs: Vec<&Tensor<T>> = node.parents.iter().map(|&p| &self.nodes[p].value).collect();
            let needs: Vec<bool> = node.parents.iter().map(|&p| self.nodes[p].requires_grad).collect();
            let mut pgrads = bw(&inputs, &node.value, &g, &needs)?;
            if self.fault.as_deref() == Some(node.op) {
                for pg in pgrads.iter_mut().flatten() {
                    pg.data_mut().iter_mut().for_each(|v| *v = *v * T::lit(1.05) + T::lit(1e-3));
                }
            }
            for ((&p, pg), need) in node.parents.iter().zip(pgrads).zip(needs) {
                let Some(pg) = pg else { continue };
                if !need {
                    continue;
                }
                if pg.dims() != self.nodes[p].value.dims() {
                    return Err(Error::Tape(format!(
                        "{}: gradient dims {:?} differ from input dims {:?}",
                        node.op,
                        pg.dims(),
                        self.nodes[p].value.dims()
                    )));
                }
                match grads[p].as_mut() {
                    Some(acc) => acc.add_assign(&pg)?,
                    None => grads[p] = Some(pg),
                }
            }
        }
        Ok(Gradients {
            leaves,
            params: self.params.clone(),
        })
    }

    fn check_var(&self, v: Var) -> Result<&Node<T>> {
        self.nodes
            .get(v.0)
            .ok_or_else(|| Error::Tape(format!("variable {} was never recorded", v.0)))
    }

    // ---- operators -------------------------------------------------------

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, geom: ConvGeom) -> Result<Var> {
        let y = ops::conv2d(self.value(x), self.value(w), b.map(|b| self.value(b)), geom)?;
        let mut parents = vec![x, w];
        parents.extend(b);
        Ok(self.custom("conv2d", y, &parents, move |inp, _, dy, needs| {
            let g = ops::conv2d_backward(inp[0], inp[1], geom, dy, needs[0])?;
            let mut out = vec![g.input, Some(g.weight)];
            if inp.len() == 3 {
                out.push(Some(g.bias));
            }
            Ok(out)
        }))
    }

    pub fn act(&mut self, kind: Activation, x: Var) -> Var {
        let y = ops::activation(kind, self.value(x));
        self.custom(kind.name(), y, &[x], move |inp, y, dy, _| {
            Ok(vec![Some(ops::activation_backward(kind, inp[0], y, dy))])
        })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.act(Activation::Relu, x)
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        self.act(Activation::Gelu, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.act(Activation::Sigmoid, x)
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let y = ops::softmax(self.value(x), axis)?;
        Ok(self.custom("softmax", y, &[x], move |_, y, dy, _| {
            Ok(vec![Some(ops::softmax_backward(y, dy, axis))])
        }))
    }

    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let y = ops::global_avg_pool(self.value(x))?;
        Ok(self.custom("global_avg_pool", y, &[x], |inp, _, dy, _| {
            Ok(vec![Some(ops::global_avg_pool_backward(inp[0].dims(), dy))])
        }))
    }

    pub fn reshape(&mut self, x: Var, dims: &[usize]) -> Result<Var> {
        let y = self.value(x).clone().reshape(dims.to_vec())?;
        Ok(self.custom("reshape", y, &[x], |inp, _, dy, _| {
            Ok(vec![Some(dy.clone().reshape(inp[0].dims().to_vec())?)])
        }))
    }

    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let y = ops::pixel_shuffle(self.value(x), r)?;
        Ok(self.custom("pixel_shuffle", y, &[x], move |_, _, dy, _| {
            Ok(vec![Some(ops::pixel_unshuffle(dy, r)?)])
        }))
    }

    pub fn pixel_unshuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let y = ops::pixel_unshuffle(self.value(x), r)?;
        Ok(self.custom("pixel_unshuffle", y, &[x], move |_, _, dy, _| {
            Ok(vec![Some(ops::pixel_shuffle(dy, r)?)])
        }))
    }

    /// `op(a) · op(b)` where `op` optionally transposes a matrix.
    pub fn matmul(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let y = ops::matmul_t(self.value(a), self.value(b), ta, tb)?;
        Ok(self.custom("matmul", y, &[a, b], move |inp, _, dy, needs| {
            // C = A·B: dA = dC·Bᵀ, dB = Aᵀ·dC, adjusted for stored transposes.
            let da = if !needs[0] {
                None
            } else if ta {
                Some(ops::matmul_t(inp[1], dy, tb, true)?)
            } else {
                Some(ops::matmul_t(dy, inp[1], false, !tb)?)
            };
            let db = if !needs[1] {
                None
            } else if tb {
                Some(ops::matmul_t(dy, inp[0], true, ta)?)
            } else {
                Some(ops::matmul_t(inp[0], dy, !ta, false)?)
            };
            Ok(vec![da, db])
        }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        Ok(self.custom("add", y, &[a, b], |_, _, dy, _| {
            Ok(vec![Some(dy.clone()), Some(dy.clone())])
        }))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        Ok(self.custom("sub", y, &[a, b], |_, _, dy, _| {
            Ok(vec![Some(dy.clone()), Some(dy.map(|v| -v))])
        }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        Ok(self.custom("mul", y, &[a, b], |inp, _, dy, needs| {
            Ok(vec![
                needs[0].then(|| dy.zip_map(inp[1], "mul", |g, b| g * b)).transpose()?,
                needs[1].then(|| dy.zip_map(inp[0], "mul", |g, a| g * a)).transpose()?,
            ])
        }))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let s = T::lit(s);
        let y = self.value(x).map(|v| v * s);
        self.custom("scale", y, &[x], move |_, _, dy, _| Ok(vec![Some(dy.map(|g| g * s))]))
    }

    /// `x / s` for a one-element tensor `s`.
    pub fn div_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.value(s).numel() != 1 {
            return shape_err("div_scalar", format!("divisor must hold one value, got {:?}", self.dims(s)));
        }
        let sv = self.value(s).item();
        let y = self.value(x).map(|v| v / sv);
        Ok(self.custom("div_scalar", y, &[x, s], |inp, y, dy, needs| {
            let sv = inp[1].item();
            let dx = needs[0].then(|| dy.map(|g| g / sv));
            let ds = needs[1].then(|| {
                let dot: T = dy.data().iter().zip(y.data()).map(|(&g, &v)| g * v).sum();
                Tensor::full(inp[1].dims().to_vec(), -dot / sv)
            });
            Ok(vec![dx, ds])
        }))
    }

    /// Broadcasts a per-channel factor (`C` or `C×1×1`) over a `C×h×w` tensor.
    pub fn mul_channels(&mut self, x: Var, s: Var) -> Result<Var> {
        let (c, h, w) = self.value(x).chw("mul_channels")?;
        if self.value(s).numel() != c {
            return shape_err("mul_channels", format!("channel axis: {c} vs scale {:?}", self.dims(s)));
        }
        let plane = h * w;
        let sv = self.value(s).data().to_vec();
        let y = Tensor::from_fn(vec![c, h, w], |i| self.value(x).data()[i] * sv[i / plane]);
        Ok(self.custom("mul_channels", y, &[x, s], move |inp, _, dy, needs| {
            let dx = needs[0].then(|| {
                Tensor::from_fn(dy.dims().to_vec(), |i| dy.data()[i] * inp[1].data()[i / plane])
            });
            let ds = needs[1].then(|| {
                let v: Vec<T> = (0..c)
                    .map(|ch| {
                        dy.channel(ch)
                            .iter()
                            .zip(inp[0].channel(ch))
                            .map(|(&g, &a)| g * a)
                            .sum()
                    })
                    .collect();
                Tensor::new(inp[1].dims().to_vec(), v).unwrap()
            });
            Ok(vec![dx, ds])
        }))
    }

    /// Adds a length-`C` bias to every row of an `N×C` matrix.
    pub fn add_row_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (n, c) = self.value(x).rc("add_row_bias")?;
        if self.dims(b) != [c] {
            return shape_err("add_row_bias", format!("bias must be [{c}], got {:?}", self.dims(b)));
        }
        let bv = self.value(b).data().to_vec();
        let y = Tensor::from_fn(vec![n, c], |i| self.value(x).data()[i] + bv[i % c]);
        Ok(self.custom("add_row_bias", y, &[x, b], move |_, _, dy, _| {
            let mut db = vec![T::zero(); c];
            for row in dy.data().chunks(c) {
                for (a, &g) in db.iter_mut().zip(row) {
                    *a = *a + g;
                }
            }
            Ok(vec![Some(dy.clone()), Some(Tensor::new(vec![c], db)?)])
        }))
    }

    /// Concatenates along the leading axis (channels of `C×h×w`, rows of a matrix).
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return shape_err("concat", "no inputs");
        };
        let tail = self.dims(first)[1..].to_vec();
        let mut lead = 0;
        let mut data = Vec::new();
        for &x in xs {
            let v = self.value(x);
            if v.dims().is_empty() || v.dims()[1..] != tail[..] {
                return shape_err("concat", format!("trailing dims {:?} vs {tail:?}", v.dims()));
            }
            lead += v.dims()[0];
            data.extend_from_slice(v.data());
        }
        let mut dims = vec![lead];
        dims.extend(&tail);
        let y = Tensor::new(dims, data)?;
        Ok(self.custom("concat", y, xs, |inp, _, dy, _| {
            let mut off = 0;
            Ok(inp
                .iter()
                .map(|t| {
                    let n = t.numel();
                    let g = Tensor::new(t.dims().to_vec(), dy.data()[off..off + n].to_vec()).unwrap();
                    off += n;
                    Some(g)
                })
                .collect())
        }))
    }

    /// Slice `start..start+len` of the leading axis.
    pub fn narrow(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let dims = self.dims(x).to_vec();
        if dims.is_empty() || start + len > dims[0] {
            return shape_err("narrow", format!("{start}+{len} out of range for {dims:?}"));
        }
        let inner: usize = dims[1..].iter().product();
        let mut odims = dims.clone();
        odims[0] = len;
        let y = Tensor::new(odims, self.value(x).data()[start * inner..(start + len) * inner].to_vec())?;
        Ok(self.custom("narrow", y, &[x], move |inp, _, dy, _| {
            let mut g = Tensor::zeros(inp[0].dims().to_vec());
            g.data_mut()[start * inner..(start + len) * inner].copy_from_slice(dy.data());
            Ok(vec![Some(g)])
        }))
    }

    /// `out[i] = x[index[i]]`; the backward pass scatter-adds.
    pub fn gather(&mut self, x: Var, dims: &[usize], index: Rc<Vec<usize>>) -> Result<Var> {
        let src = self.value(x);
        if index.len() != super::tensor::numel_of(dims) || index.iter().any(|&i| i >= src.numel()) {
            return shape_err("gather", format!("index map does not fit {:?} → {dims:?}", src.dims()));
        }
        let y = Tensor::new(dims.to_vec(), index.iter().map(|&i| src.data()[i]).collect())?;
        Ok(self.custom("gather", y, &[x], move |inp, _, dy, _| {
            let mut g = Tensor::zeros(inp[0].dims().to_vec());
            let gd = g.data_mut();
            for (&i, &v) in index.iter().zip(dy.data()) {
                gd[i] = gd[i] + v;
            }
            Ok(vec![Some(g)])
        }))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.value(x).rc("transpose")?;
        let index: Vec<usize> = (0..r * c).map(|i| (i % r) * c + i / r).collect();
        self.gather(x, &[c, r], Rc::new(index))
    }

    pub fn pad_reflect(&mut self, x: Var, bottom: usize, right: usize) -> Result<Var> {
        if bottom == 0 && right == 0 {
            return Ok(x);
        }
        let y = ops::pad_reflect(self.value(x), bottom, right)?;
        Ok(self.custom("pad_reflect", y, &[x], |inp, _, dy, _| {
            Ok(vec![Some(ops::pad_reflect_backward(inp[0].dims(), dy))])
        }))
    }

    pub fn crop(&mut self, x: Var, h: usize, w: usize) -> Result<Var> {
        let (_, ih, iw) = self.value(x).chw("crop")?;
        if (ih, iw) == (h, w) {
            return Ok(x);
        }
        let y = ops::crop(self.value(x), h, w)?;
        Ok(self.custom("crop", y, &[x], move |inp, _, dy, _| {
            let (c, ih, iw) = (inp[0].dims()[0], inp[0].dims()[1], inp[0].dims()[2]);
            let mut g = Tensor::zeros(vec![c, ih, iw]);
            for ch in 0..c {
                let dst = g.channel_mut(ch);
                let src = dy.channel(ch);
                for i in 0..h {
                    dst[i * iw..i * iw + w].copy_from_slice(&src[i * w..(i + 1) * w]);
                }
            }
            Ok(vec![Some(g)])
        }))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        const EPS: f64 = 1e-5;
        let y = ops::layer_norm_rows(self.value(x), self.value(gamma), self.value(beta), EPS)?;
        Ok(self.custom("layer_norm", y, &[x, gamma, beta], |inp, _, dy, _| {
            let (dx, dg, db) = ops::layer_norm_rows_backward(inp[0], inp[1], dy, EPS);
            Ok(vec![Some(dx), Some(dg), Some(db)])
        }))
    }

    /// Sum of all elements as a one-element tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let y = Tensor::scalar(self.value(x).sum());
        self.custom("sum", y, &[x], |inp, _, dy, _| {
            Ok(vec![Some(Tensor::full(inp[0].dims().to_vec(), dy.item()))])
        })
    }

    /// Mean absolute difference, normalised by element count.
    pub fn l1_mean(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (p, t) = (self.value(pred), self.value(target));
        p.expect_same_dims(t, "l1_mean")?;
        let n = T::lit(p.numel() as f64);
        let total: f64 = p.data().iter().zip(t.data()).map(|(&a, &b)| (a - b).abs().f64()).sum();
        let y = Tensor::scalar(T::lit(total) / n);
        Ok(self.custom("l1_mean", y, &[pred, target], move |inp, _, dy, needs| {
            let g = dy.item() / n;
            let sign = inp[0].zip_map(inp[1], "l1_mean", |a, b| {
                if a > b {
                    g
                } else if a < b {
                    -g
                } else {
                    T::zero()
                }
            })?;
            let neg = needs[1].then(|| sign.map(|v| -v));
            Ok(vec![Some(sign), neg])
        }))
    }
}
