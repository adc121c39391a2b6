//! Width-2, stride-2 max pooling.

use super::{NnError, Result, Tensor};

/// Result of [`max_pool2`]: the pooled values plus, per output element, the
/// flat input index that won, which the backward pass routes gradients to.
#[derive(Debug, Clone)]
pub struct Pooled {
    pub output: Tensor,
    pub argmax: Vec<usize>,
}

/// Max pooling over non-overlapping pairs along the time axis.
///
/// An odd trailing sample is dropped (`out_len = floor(len / 2)`). Ties go to
/// the earlier index, so backward routing is deterministic.
pub fn max_pool2(input: &Tensor) -> Result<Pooled> {
    let (ch, len) = input.dims2()?;
    if len < 2 {
        return Err(NnError::ShapeMismatch(format!(
            "max_pool2 needs at least 2 samples per channel, got {len}"
        )));
    }
    let out_len = len / 2;
    let mut output = Tensor::zeros(&[ch, out_len]);
    let mut argmax = vec![0usize; ch * out_len];
    let x = input.data();
    let y = output.data_mut();
    for c in 0..ch {
        for t in 0..out_len {
            let i = c * len + 2 * t;
            let (v, win) = if x[i] >= x[i + 1] { (x[i], i) } else { (x[i + 1], i + 1) };
            y[c * out_len + t] = v;
            argmax[c * out_len + t] = win;
        }
    }
    Ok(Pooled { output, argmax })
}

/// Routes `dy` back through the pooling recorded in `pooled`.
pub fn max_pool2_backward(pooled: &Pooled, input_shape: &[usize], dy: &Tensor) -> Result<Tensor> {
    if dy.shape() != pooled.output.shape() {
        return Err(NnError::ShapeMismatch(format!(
            "pool backward expects dy of shape {:?}, got {:?}",
            pooled.output.shape(),
            dy.shape()
        )));
    }
    let mut dx = Tensor::zeros(input_shape);
    if dx.len() <= *pooled.argmax.iter().max().unwrap_or(&0) {
        return Err(NnError::ShapeMismatch(format!(
            "pool backward: input shape {input_shape:?} is too small for recorded indices"
        )));
    }
    let dxd = dx.data_mut();
    for (&idx, &g) in pooled.argmax.iter().zip(dy.data()) {
        dxd[idx] += g;
    }
    Ok(dx)
}
