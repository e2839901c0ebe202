//! Finite-difference verification of the analytic backward passes.
//!
//! The analytic gradient is computed at the precision under test; the central
//! difference oracle always runs in `f64` at the same (rounded) point, so a
//! 32-bit backward can be held to a tight tolerance.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ParamStore, Scalar, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// A function of learnable parameters and inputs that can be recorded on a tape.
pub trait Differentiable {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, params: &ParamStore<T>, inputs: &[Var])
        -> Result<Var>;
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    pub tolerance: f64,
    /// Check at most this many coordinates of each tensor (all when `None`).
    pub max_coords_per_tensor: Option<usize>,
    /// Errors on partials smaller than `floor_ratio · max|grad|` are measured
    /// against that floor instead of the partial itself.
    pub floor_ratio: f64,
    pub seed: u64,
    /// Name of an operator whose backward rule gets perturbed (harness self-test).
    pub fault: Option<String>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            tolerance: 1e-3,
            max_coords_per_tensor: None,
            floor_ratio: 1e-3,
            seed: 0,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct GradCheckReport {
    pub name: String,
    pub precision: &'static str,
    pub checked: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Tensor and flat index of the worst partial.
    pub worst: String,
    pub tolerance: f64,
    pub passed: bool,
}

struct Probe {
    label: String,
    analytic: Vec<f64>,
    coords: Vec<usize>,
}

fn round_to<A: Scalar>(t: &Tensor<f64>) -> Tensor<f64> {
    t.cast::<A>().cast::<f64>()
}

fn objective<F: Differentiable>(
    f: &F,
    params: &ParamStore<f64>,
    inputs: &[Tensor<f64>],
    weights: &Tensor<f64>,
) -> Result<f64> {
    let mut tape = Tape::<f64>::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let y = f.eval(&mut tape, params, &vars)?;
    let out = tape.value(y);
    out.expect_same_dims(weights, "grad_check")?;
    let v: f64 = out.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum();
    if !v.is_finite() {
        return Err(Error::NonFinite("grad_check objective".into()));
    }
    Ok(v)
}

/// Compares analytic partials at precision `A` against `f64` central differences
/// of the objective `Σ wᵢ·yᵢ` (fixed pseudo-random weights `w`).
pub fn grad_check<A: Scalar, F: Differentiable>(
    name: &str,
    f: &F,
    params: &ParamStore<f64>,
    inputs: &[Tensor<f64>],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut params = params.clone();
    for p in params.iter_mut() {
        p.value = round_to::<A>(&p.value);
    }
    let inputs: Vec<Tensor<f64>> = inputs.iter().map(round_to::<A>).collect();

    // Analytic pass.
    let mut tape = Tape::<A>::new();
    if let Some(op) = &opts.fault {
        tape.inject_fault(op.clone());
    }
    let pa = params.cast::<A>();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.cast())).collect();
    let y = f.eval(&mut tape, &pa, &vars)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let weights = {
        use rand::Rng;
        Tensor::<f64>::from_fn(tape.dims(y).to_vec(), |_| rng.random_range(-1.0..1.0))
    };
    let wv = tape.input(weights.cast());
    let prod = tape.mul(y, wv)?;
    let total = tape.sum(prod);
    let grads = tape.backward(total)?;

    let mut probes = Vec::new();
    let pick = |n: usize, salt: u64| -> Vec<usize> {
        match opts.max_coords_per_tensor {
            Some(m) if m < n => {
                let mut r = ChaCha8Rng::seed_from_u64(opts.seed ^ (salt.wrapping_mul(0x9e37_79b9)));
                let mut v = sample(&mut r, n, m).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        }
    };
    for (i, &v) in vars.iter().enumerate() {
        let g = grads.wrt(v).map(|g| g.cast::<f64>()).unwrap_or_else(|| Tensor::zeros(inputs[i].dims().to_vec()));
        probes.push(Probe {
            label: format!("input{i}"),
            coords: pick(g.numel(), i as u64),
            analytic: g.into_data(),
        });
    }
    let mut pgrads: Vec<Tensor<f64>> = pa.iter().map(|p| Tensor::zeros(p.value.dims().to_vec())).collect();
    for (id, g) in grads.params() {
        pgrads[id.index()].add_assign(&g.cast())?;
    }
    for (i, g) in pgrads.into_iter().enumerate() {
        let p = pa.get(super::ParamId(i));
        probes.push(Probe {
            label: p.name.clone(),
            coords: pick(g.numel(), 1000 + i as u64),
            analytic: g.into_data(),
        });
    }

    // Numerical pass.
    let eps = opts.epsilon;
    let mut numeric: Vec<Vec<f64>> = Vec::with_capacity(probes.len());
    for (pi, probe) in probes.iter().enumerate() {
        let mut vals = Vec::with_capacity(probe.coords.len());
        for &k in &probe.coords {
            let eval_at = |delta: f64| -> Result<f64> {
                if pi < inputs.len() {
                    let mut inp = inputs.clone();
                    inp[pi].data_mut()[k] += delta;
                    objective(f, &params, &inp, &weights)
                } else {
                    let mut ps = params.clone();
                    let id = super::ParamId(pi - inputs.len());
                    ps.get_mut(id).value.data_mut()[k] += delta;
                    objective(f, &ps, &inputs, &weights)
                }
            };
            vals.push((eval_at(eps)? - eval_at(-eps)?) / (2.0 * eps));
        }
        numeric.push(vals);
    }

    let scale = numeric
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (opts.floor_ratio * scale).max(1e-12);
    let mut report = GradCheckReport {
        name: name.to_string(),
        precision: A::NAME,
        checked: 0,
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        worst: String::new(),
        tolerance: opts.tolerance,
        passed: false,
    };
    for (probe, vals) in probes.iter().zip(&numeric) {
        for (&k, &n) in probe.coords.iter().zip(vals) {
            let a = probe.analytic[k];
            if !a.is_finite() {
                return Err(Error::NonFinite(format!("analytic gradient of {}[{k}]", probe.label)));
            }
            let abs = (a - n).abs();
            let rel = abs / a.abs().max(n.abs()).max(floor);
            report.checked += 1;
            report.max_abs_err = report.max_abs_err.max(abs);
            if rel > report.max_rel_err || report.worst.is_empty() {
                report.max_rel_err = report.max_rel_err.max(rel);
                report.worst = format!("{}[{k}]", probe.label);
            }
        }
    }
    report.passed = report.max_rel_err <= opts.tolerance;
    Ok(report)
}
