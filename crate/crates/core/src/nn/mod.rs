//! Neural network primitives.
//!
//! Only the operations the scorer needs, written directly on `f64` buffers:
//! valid 1D convolution, width-2 max pooling, a dense layer, inverted
//! dropout, softmax, cross-entropy, and Adam. Every backward pass is derived
//! by hand and checked against central finite differences in the test suite.
//! All arithmetic is 64-bit; there are no approximate fast-math shortcuts,
//! so forward and backward passes are bit-reproducible for a given seed.

pub mod adam;
pub mod conv;
pub mod dense;
pub mod loss;
pub mod ops;
pub mod pool;
pub mod tensor;

#[cfg(test)]
pub(crate) mod tests_support;

pub use adam::AdamState;
pub use conv::{Conv1d, ConvGrads};
pub use dense::{Dense, DenseGrads};
pub use loss::cross_entropy;
pub use ops::{dropout_backward, dropout_forward, softmax};
pub use pool::{max_pool2, max_pool2_backward, Pooled};
pub use tensor::Tensor;

use thiserror::Error;

/// Errors raised by tensor and layer operations.
#[derive(Debug, Error)]
pub enum NnError {
    /// Operand shapes are incompatible with the operation.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// A vector that must be a probability distribution is not one.
    #[error("invalid probability distribution: {0}")]
    DistributionInvalid(String),
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Activation applied by a layer after its affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
}

impl Activation {
    #[inline]
    pub(crate) fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
        }
    }
}
