//! Orthonormal 2-D block DCT (type II) and its inverse.

use std::sync::Arc;

use crate::error::{shape_err, Result};
use crate::tensorkernels::{Scalar, Tape, Tensor, Var};

/// Precomputed `n×n` orthonormal DCT-II basis; row `k` holds frequency `k`.
#[derive(Clone, Debug)]
pub struct DctPlan {
    block_size: usize,
    basis: Arc<Vec<f64>>,
}

impl DctPlan {
    pub fn new(block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return shape_err("dct_plan", "block size must be positive");
        }
        let n = block_size;
        let mut basis = vec![0.0; n * n];
        for k in 0..n {
            let c = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            for i in 0..n {
                basis[k * n + i] =
                    c * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
            }
        }
        Ok(Self {
            block_size,
            basis: Arc::new(basis),
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Basis matrix as an `n×n` tensor.
    pub fn basis<T: Scalar>(&self) -> Tensor<T> {
        Tensor::from_fn(vec![self.block_size, self.block_size], |i| T::lit(self.basis[i]))
    }

    /// In-place transform of one row-major `n×n` block held in `buf`.
    /// Forward computes `B·X·Bᵀ`; inverse computes `Bᵀ·X·B`.
    fn transform_block<T: Scalar>(&self, basis: &[T], buf: &mut [T], tmp: &mut [T], inverse: bool) {
        let n = self.block_size;
        // tmp = op(B) · X
        for r in 0..n {
            for c in 0..n {
                let mut acc = T::zero();
                for k in 0..n {
                    let b = if inverse { basis[k * n + r] } else { basis[r * n + k] };
                    acc = acc + b * buf[k * n + c];
                }
                tmp[r * n + c] = acc;
            }
        }
        // buf = tmp · op(B)ᵀ
        for r in 0..n {
            for c in 0..n {
                let mut acc = T::zero();
                for k in 0..n {
                    let b = if inverse { basis[k * n + c] } else { basis[c * n + k] };
                    acc = acc + tmp[r * n + k] * b;
                }
                buf[r * n + c] = acc;
            }
        }
    }

    fn check_block<T: Scalar>(&self, t: &Tensor<T>, op: &'static str) -> Result<()> {
        let n = self.block_size;
        if t.dims() != [n, n] {
            return shape_err(op, format!("expected {n}×{n} block, got {:?}", t.dims()));
        }
        Ok(())
    }
}

pub fn dct2_block<T: Scalar>(plan: &DctPlan, block: &Tensor<T>) -> Result<Tensor<T>> {
    plan.check_block(block, "dct2_block")?;
    let basis = plan.basis::<T>();
    let mut out = block.clone();
    let mut tmp = vec![T::zero(); block.numel()];
    plan.transform_block(basis.data(), out.data_mut(), &mut tmp, false);
    Ok(out)
}

pub fn idct2_block<T: Scalar>(plan: &DctPlan, coeffs: &Tensor<T>) -> Result<Tensor<T>> {
    plan.check_block(coeffs, "idct2_block")?;
    let basis = plan.basis::<T>();
    let mut out = coeffs.clone();
    let mut tmp = vec![T::zero(); coeffs.numel()];
    plan.transform_block(basis.data(), out.data_mut(), &mut tmp, true);
    Ok(out)
}

/// Transforms every non-overlapping block of every channel of a `C×h×w` tensor.
/// `h` and `w` must be multiples of the block size.
pub fn block_dct<T: Scalar>(plan: &DctPlan, x: &Tensor<T>, inverse: bool) -> Result<Tensor<T>> {
    let (c, h, w) = x.chw("block_dct")?;
    let n = plan.block_size;
    if h % n != 0 || w % n != 0 {
        return shape_err(
            "block_dct",
            format!("spatial dims {h}×{w} not divisible by block size {n}; pad first"),
        );
    }
    let basis = plan.basis::<T>();
    let mut out = x.clone();
    let mut buf = vec![T::zero(); n * n];
    let mut tmp = vec![T::zero(); n * n];
    for ch in 0..c {
        let plane = out.channel_mut(ch);
        for by in (0..h).step_by(n) {
            for bx in (0..w).step_by(n) {
                for r in 0..n {
                    buf[r * n..(r + 1) * n].copy_from_slice(&plane[(by + r) * w + bx..(by + r) * w + bx + n]);
                }
                plan.transform_block(basis.data(), &mut buf, &mut tmp, inverse);
                for r in 0..n {
                    plane[(by + r) * w + bx..(by + r) * w + bx + n].copy_from_slice(&buf[r * n..(r + 1) * n]);
                }
            }
        }
    }
    Ok(out)
}

/// Records [`block_dct`] on a tape. The transform is orthonormal, so the
/// backward pass is the opposite transform applied to the upstream gradient.
pub fn block_dct_var<T: Scalar>(tape: &mut Tape<T>, plan: &DctPlan, x: Var, inverse: bool) -> Result<Var> {
    let y = block_dct(plan, tape.value(x), inverse)?;
    let plan = plan.clone();
    let name = if inverse { "block_idct" } else { "block_dct" };
    Ok(tape.custom(name, y, &[x], move |_, _, dy, _| {
        Ok(vec![Some(block_dct(&plan, dy, !inverse)?)])
    }))
}
