use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensorkernels::{ConvGeom, ParamId, ParamStore, Scalar, Tape, Tensor, Var};

/// Initial values of a new parameter tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `±1/√fan_in`.
    FanIn(usize),
    Zeros,
    Ones,
    /// Unit center tap on the diagonal of a `[out, in, k, k]` kernel (every
    /// output channel when `in = 1`); `[out, in]` matrices get an identity block.
    Eye,
}

/// Registers parameters in a store, drawing random values from one seeded stream.
pub struct Builder<'a> {
    store: &'a mut ParamStore<f32>,
    rng: ChaCha8Rng,
}

impl<'a> Builder<'a> {
    pub fn new(store: &'a mut ParamStore<f32>, seed: u64) -> Self {
        Self { store, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn store(&self) -> &ParamStore<f32> {
        self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<f32> {
        self.store
    }

    pub fn tensor(&mut self, name: &str, dims: &[usize], init: Init) -> Result<ParamId> {
        let t = match init {
            Init::FanIn(fan_in) => {
                let bound = 1.0 / (fan_in.max(1) as f32).sqrt();
                Tensor::from_fn(dims.to_vec(), |_| self.rng.random_range(-bound..bound))
            }
            Init::Zeros => Tensor::zeros(dims.to_vec()),
            Init::Ones => Tensor::full(dims.to_vec(), 1.0),
            Init::Eye => eye(dims),
        };
        self.store.insert(name, t)
    }

    /// `k×k` convolution `cin → cout`. Weight init `init`; the bias, when
    /// present, is zero for non-random inits and fan-in uniform otherwise.
    pub fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, geom: ConvGeom, bias: bool, init: Init) -> Result<Conv2d> {
        let fan_in = cin / geom.groups * k * k;
        let init = match init {
            Init::FanIn(_) => Init::FanIn(fan_in),
            other => other,
        };
        let weight = self.tensor(&format!("{name}.weight"), &[cout, cin / geom.groups, k, k], init)?;
        let bias_init = if matches!(init, Init::FanIn(_)) { init } else { Init::Zeros };
        let bias = bias.then(|| self.tensor(&format!("{name}.bias"), &[cout], bias_init)).transpose()?;
        Ok(Conv2d { weight, bias, geom })
    }

    /// Same-size `k×k` convolution with bias and fan-in init.
    pub fn conv_same(&mut self, name: &str, cin: usize, cout: usize, k: usize) -> Result<Conv2d> {
        self.conv(name, cin, cout, k, ConvGeom::same(k, 1), true, Init::FanIn(0))
    }

    /// Same-size `k×k` convolution with all-zero weights and bias.
    pub fn conv_zero(&mut self, name: &str, cin: usize, cout: usize, k: usize) -> Result<Conv2d> {
        self.conv(name, cin, cout, k, ConvGeom::same(k, 1), true, Init::Zeros)
    }

    pub fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize, init: Init) -> Result<Linear> {
        let init = match init {
            Init::FanIn(_) => Init::FanIn(fan_in),
            other => other,
        };
        let weight = self.tensor(&format!("{name}.weight"), &[fan_out, fan_in], init)?;
        let bias_init = if matches!(init, Init::FanIn(_)) { init } else { Init::Zeros };
        let bias = self.tensor(&format!("{name}.bias"), &[fan_out], bias_init)?;
        Ok(Linear { weight, bias })
    }

    pub fn layer_norm(&mut self, name: &str, channels: usize) -> Result<LayerNorm> {
        Ok(LayerNorm {
            gamma: self.tensor(&format!("{name}.gamma"), &[channels], Init::Ones)?,
            beta: self.tensor(&format!("{name}.beta"), &[channels], Init::Zeros)?,
        })
    }
}

fn eye(dims: &[usize]) -> Tensor<f32> {
    let mut t = Tensor::zeros(dims.to_vec());
    match *dims {
        [o, i, kh, kw] => {
            let center = (kh / 2) * kw + kw / 2;
            for oc in 0..o {
                let ic = if i == 1 { 0 } else { oc };
                if ic < i {
                    t.data_mut()[(oc * i + ic) * kh * kw + center] = 1.0;
                }
            }
        }
        [o, i] => {
            for k in 0..o.min(i) {
                t.data_mut()[k * i + k] = 1.0;
            }
        }
        _ => {}
    }
    t
}

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub geom: ConvGeom,
}

impl Conv2d {
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = tape.param(ps, self.weight);
        let b = self.bias.map(|b| tape.param(ps, b));
        tape.conv2d(x, w, b, self.geom)
    }
}

/// Row-wise affine map `x·Wᵀ + b` of an `N×in` token matrix.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = tape.param(ps, self.weight);
        let b = tape.param(ps, self.bias);
        let y = tape.matmul(x, w, false, true)?;
        tape.add_row_bias(y, b)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, x: Var) -> Result<Var> {
        let g = tape.param(ps, self.gamma);
        let b = tape.param(ps, self.beta);
        tape.layer_norm(x, g, b)
    }
}

/// Overwrites every parameter with uniform noise in `±amplitude`, so that
/// gradient checks exercise branches that start out zeroed.
pub fn randomize_params<T: Scalar>(store: &mut ParamStore<T>, seed: u64, amplitude: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in store.iter_mut() {
        p.value = Tensor::from_fn(p.value.dims().to_vec(), |_| T::lit(rng.random_range(-amplitude..amplitude)));
    }
}
