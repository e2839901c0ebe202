use crate::error::Result;
use crate::tensorkernels::{Scalar, Tape, Tensor, Var};

/// `α·mean|Ŷ_raw − Y_raw| + mean|Ŷ_rgb − Y_rgb|` recorded on a tape.
pub fn joint_loss<T: Scalar>(
    tape: &mut Tape<T>,
    pred_rgb: Var,
    target_rgb: Var,
    pred_raw: Var,
    target_raw: Var,
    alpha: f64,
) -> Result<Var> {
    let l_rgb = tape.l1_mean(pred_rgb, target_rgb)?;
    let l_raw = tape.l1_mean(pred_raw, target_raw)?;
    let l_raw = tape.scale(l_raw, alpha);
    tape.add(l_rgb, l_raw)
}

/// Value of [`joint_loss`] without recording gradients.
pub fn joint_loss_value<T: Scalar>(
    pred_rgb: &Tensor<T>,
    target_rgb: &Tensor<T>,
    pred_raw: &Tensor<T>,
    target_raw: &Tensor<T>,
    alpha: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let v: Vec<Var> = [pred_rgb, target_rgb, pred_raw, target_raw].iter().map(|t| tape.input((*t).clone())).collect();
    let l = joint_loss(&mut tape, v[0], v[1], v[2], v[3], alpha)?;
    Ok(tape.value(l).item().f64())
}
