use crate::error::{Error, Result};
use crate::tensorkernels::{ParamStore, Tensor};

/// AdamW moments for every parameter of a store, in store order.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub m: Vec<Tensor<f32>>,
    pub v: Vec<Tensor<f32>>,
    pub step: u64,
}

impl OptimState {
    pub fn new(params: &ParamStore<f32>) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.value.dims().to_vec())).collect();
        Self { m: zeros(), v: zeros(), step: 0 }
    }

    fn check(&self, params: &ParamStore<f32>) -> Result<()> {
        let fits = |ts: &[Tensor<f32>]| ts.len() == params.len() && ts.iter().zip(params.iter()).all(|(t, p)| t.dims() == p.value.dims());
        if !fits(&self.m) || !fits(&self.v) {
            return Err(Error::Config("optimizer state does not match the parameter layout".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub betas: [f64; 2],
    pub weight_decay: f64,
    pub eps: f64,
}

/// One AdamW update with decoupled weight decay and bias correction, then
/// zeroes the gradients. Nothing is modified when any gradient is non-finite.
pub fn adamw_step(params: &mut ParamStore<f32>, state: &mut OptimState, opt: AdamW) -> Result<()> {
    state.check(params)?;
    if let Some(p) = params.iter().find(|p| p.grad.data().iter().any(|g| !g.is_finite())) {
        return Err(Error::NonFinite(format!("gradient of {}", p.name)));
    }
    state.step += 1;
    let [b1, b2] = opt.betas;
    let t = state.step as i32;
    let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
    let decay = 1.0 - opt.lr * opt.weight_decay;
    for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let (w, g) = (p.value.data_mut(), p.grad.data());
        for (((w, &g), m), v) in w.iter_mut().zip(g).zip(m.data_mut()).zip(v.data_mut()) {
            let g = g as f64;
            let mm = b1 * *m as f64 + (1.0 - b1) * g;
            let vv = b2 * *v as f64 + (1.0 - b2) * g * g;
            *m = mm as f32;
            *v = vv as f32;
            let update = (mm / c1) / ((vv / c2).sqrt() + opt.eps);
            *w = (*w as f64 * decay - opt.lr * update) as f32;
        }
    }
    params.zero_grad();
    Ok(())
}
