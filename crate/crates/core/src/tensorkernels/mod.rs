//! Differentiable tensor primitives with explicit backward rules.

pub mod gradcheck;
pub mod ops;
mod params;
mod scalar;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, Differentiable, GradCheckOptions, GradCheckReport};
pub use ops::{Activation, ConvGeom, Resample};
pub use params::{Param, ParamId, ParamStore};
pub use scalar::{gemm, Scalar};
pub use tape::{BackwardFn, Gradients, Tape, Var};
pub use tensor::Tensor;
