//! Dropout and softmax.

use super::{NnError, Result, Tensor};
use crate::rng::SeededRng;
use rand::Rng;

/// Inverted dropout.
///
/// At train time each element is zeroed with probability `rate` and the
/// survivors are scaled by `1 / (1 - rate)`, so the expected output equals
/// the input and inference needs no rescaling. The returned mask holds the
/// applied per-element factor (`0` or `1 / (1 - rate)`); backward is an
/// element-wise product with it. With `training = false` the input passes
/// through and the mask is all ones.
pub fn dropout_forward(
    input: &Tensor,
    rate: f64,
    training: bool,
    rng: &mut SeededRng,
) -> Result<(Tensor, Tensor)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::DistributionInvalid(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    let mut mask = Tensor::new(input.shape().to_vec(), vec![1.0; input.len()])?;
    if training && rate > 0.0 {
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        for m in mask.data_mut() {
            *m = if rng.gen::<f64>() < keep { scale } else { 0.0 };
        }
    }
    let mut out = input.clone();
    for (o, &m) in out.data_mut().iter_mut().zip(mask.data()) {
        *o *= m;
    }
    Ok((out, mask))
}

/// Backward pass through a dropout mask produced by [`dropout_forward`].
pub fn dropout_backward(mask: &Tensor, dy: &Tensor) -> Result<Tensor> {
    if mask.shape() != dy.shape() {
        return Err(NnError::ShapeMismatch(format!(
            "dropout backward: mask shape {:?} vs dy shape {:?}",
            mask.shape(),
            dy.shape()
        )));
    }
    let mut dx = dy.clone();
    for (d, &m) in dx.data_mut().iter_mut().zip(mask.data()) {
        *d *= m;
    }
    Ok(dx)
}

/// Numerically stable softmax: the maximum logit is subtracted before
/// exponentiation, making overflow impossible for finite inputs.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(NnError::ShapeMismatch("softmax of an empty vector".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(NnError::DistributionInvalid(
            "softmax input contains a non-finite logit".into(),
        ));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}
