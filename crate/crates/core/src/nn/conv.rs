//! Valid 1D convolution (cross-correlation, stride 1).

use super::{Activation, NnError, Result, Tensor};

/// A 1D convolution layer with optional fused ReLU.
///
/// The kernel is `[out_channels, in_channels, width]`, the bias is
/// `[out_channels]`. No flipping is performed: like every deep learning
/// framework this computes cross-correlation,
/// `y[o][t] = act(b[o] + sum_c sum_j x[c][t + j] * w[o][c][j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub kernel: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

/// Gradients produced by [`Conv1d::backward`].
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernel: Tensor,
    pub bias: Tensor,
}

impl Conv1d {
    pub fn new(kernel: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let (out_ch, _, _) = kernel.dims3()?;
        if bias.shape() != [out_ch] {
            return Err(NnError::ShapeMismatch(format!(
                "conv bias shape {:?} does not match {out_ch} output channels",
                bias.shape()
            )));
        }
        Ok(Self { kernel, bias, activation })
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn kernel_width(&self) -> usize {
        self.kernel.shape()[2]
    }

    /// Output length for an input of length `len`.
    pub fn out_len(&self, len: usize) -> Result<usize> {
        let k = self.kernel_width();
        if len < k {
            return Err(NnError::ShapeMismatch(format!(
                "input length {len} is shorter than kernel width {k}"
            )));
        }
        Ok(len - k + 1)
    }

    /// Forward pass over an input of shape `[in_channels, len]`.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (ci, len) = input.dims2()?;
        if ci != self.in_channels() {
            return Err(NnError::ShapeMismatch(format!(
                "conv expects {} input channels, got {ci}",
                self.in_channels()
            )));
        }
        let co = self.out_channels();
        let k = self.kernel_width();
        let out_len = self.out_len(len)?;

        let mut out = Tensor::zeros(&[co, out_len]);
        let x = input.data();
        let w = self.kernel.data();
        let b = self.bias.data();
        let y = out.data_mut();
        for o in 0..co {
            let yo = &mut y[o * out_len..(o + 1) * out_len];
            for c in 0..ci {
                let xc = &x[c * len..(c + 1) * len];
                let wk = &w[(o * ci + c) * k..(o * ci + c + 1) * k];
                for (j, &wj) in wk.iter().enumerate() {
                    for (t, yt) in yo.iter_mut().enumerate() {
                        *yt += wj * xc[t + j];
                    }
                }
            }
            for yt in yo.iter_mut() {
                *yt = self.activation.apply(*yt + b[o]);
            }
        }
        Ok(out)
    }

    /// Backward pass.
    ///
    /// Takes the forward input `x`, the forward *output* `y` (post
    /// activation), and the loss gradient `dy` with respect to that output.
    /// ReLU's derivative is recoverable from the output alone (`y > 0`), so
    /// no pre-activation cache is needed.
    pub fn backward(&self, x: &Tensor, y: &Tensor, dy: &Tensor) -> Result<ConvGrads> {
        let (ci, len) = x.dims2()?;
        let co = self.out_channels();
        let k = self.kernel_width();
        let out_len = self.out_len(len)?;
        if ci != self.in_channels() {
            return Err(NnError::ShapeMismatch(format!(
                "conv expects {} input channels, got {ci}",
                self.in_channels()
            )));
        }
        if y.shape() != [co, out_len] || dy.shape() != [co, out_len] {
            return Err(NnError::ShapeMismatch(format!(
                "conv backward expects y and dy of shape [{co}, {out_len}], got {:?} and {:?}",
                y.shape(),
                dy.shape()
            )));
        }

        // dz = dy gated by the activation derivative.
        let mut dz = dy.clone();
        if self.activation == Activation::Relu {
            for (d, &yo) in dz.data_mut().iter_mut().zip(y.data()) {
                if yo <= 0.0 {
                    *d = 0.0;
                }
            }
        }

        let mut g = ConvGrads {
            input: Tensor::zeros(&[ci, len]),
            kernel: Tensor::zeros(&[co, ci, k]),
            bias: Tensor::zeros(&[co]),
        };
        let xd = x.data();
        let wd = self.kernel.data();
        let dzd = dz.data();
        for o in 0..co {
            let dzo = &dzd[o * out_len..(o + 1) * out_len];
            g.bias.data_mut()[o] = dzo.iter().sum();
            for c in 0..ci {
                let xc = &xd[c * len..(c + 1) * len];
                let wk = &wd[(o * ci + c) * k..(o * ci + c + 1) * k];
                let dwk = &mut g.kernel.data_mut()[(o * ci + c) * k..(o * ci + c + 1) * k];
                for (j, dwj) in dwk.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (t, &dzt) in dzo.iter().enumerate() {
                        acc += xc[t + j] * dzt;
                    }
                    *dwj = acc;
                }
                let dxc = &mut g.input.data_mut()[c * len..(c + 1) * len];
                for (j, &wj) in wk.iter().enumerate() {
                    for (t, &dzt) in dzo.iter().enumerate() {
                        dxc[t + j] += wj * dzt;
                    }
                }
            }
        }
        Ok(g)
    }
}
