//! Fully connected layer.

use super::{NnError, Result, Tensor};

/// A dense layer `y = x W + b` with weights `[in_features, out_features]`.
///
/// No activation: the model's dense layer feeds softmax directly, and the
/// softmax + cross-entropy pair is differentiated jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Gradients produced by [`Dense::backward`].
#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Vec<f64>,
    pub weights: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        let (_, out) = weights.dims2()?;
        if bias.shape() != [out] {
            return Err(NnError::ShapeMismatch(format!(
                "dense bias shape {:?} does not match {out} output features",
                bias.shape()
            )));
        }
        Ok(Self { weights, bias })
    }

    pub fn in_features(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_features(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let (n_in, n_out) = self.weights.dims2()?;
        if input.len() != n_in {
            return Err(NnError::ShapeMismatch(format!(
                "dense expects {n_in} inputs, got {}",
                input.len()
            )));
        }
        let w = self.weights.data();
        let mut y = self.bias.data().to_vec();
        for (i, &xi) in input.iter().enumerate() {
            let row = &w[i * n_out..(i + 1) * n_out];
            for (yj, &wij) in y.iter_mut().zip(row) {
                *yj += xi * wij;
            }
        }
        Ok(y)
    }

    /// Backward pass from the gradient `dy` with respect to the output.
    pub fn backward(&self, input: &[f64], dy: &[f64]) -> Result<DenseGrads> {
        let (n_in, n_out) = self.weights.dims2()?;
        if input.len() != n_in || dy.len() != n_out {
            return Err(NnError::ShapeMismatch(format!(
                "dense backward expects input of {n_in} and dy of {n_out}, got {} and {}",
                input.len(),
                dy.len()
            )));
        }
        let w = self.weights.data();
        let mut g = DenseGrads {
            input: vec![0.0; n_in],
            weights: Tensor::zeros(&[n_in, n_out]),
            bias: Tensor::new(vec![n_out], dy.to_vec())?,
        };
        let dw = g.weights.data_mut();
        for i in 0..n_in {
            let row = &w[i * n_out..(i + 1) * n_out];
            let drow = &mut dw[i * n_out..(i + 1) * n_out];
            let xi = input[i];
            let mut acc = 0.0;
            for j in 0..n_out {
                acc += row[j] * dy[j];
                drow[j] = xi * dy[j];
            }
            g.input[i] = acc;
        }
        Ok(g)
    }
}
