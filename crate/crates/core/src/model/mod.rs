//! The convolutional sleep stage scorer.
//!
//! Seven blocks of (valid 1D convolution, ReLU, width-2 max pool) squeeze a
//! 30 s, 100 Hz segment from 3000 samples down to 20 positions of 20
//! filters; the 400 flattened features pass through dropout into a dense
//! layer and softmax over the five stages. Kernel widths shrink with the
//! temporal resolution: 7, 7, 5, 5, 4, 4, 3.
//!
//! The same architecture serves one- and two-channel inputs; only the first
//! convolution's kernel grows with the channel count (13,485 parameters for
//! one channel, 13,625 for two).

pub mod io;

pub use io::{decode_model, encode_model, load_model, save_model};

use crate::nn::{
    cross_entropy, dropout_backward, dropout_forward, loss::one_hot, max_pool2,
    max_pool2_backward, softmax, Activation, Conv1d, Dense, NnError, Pooled, Tensor,
};
use crate::rng::{seeded, SeededRng};
use rand::Rng;
use thiserror::Error;

/// Sleep stages scored by the model.
pub const N_CLASSES: usize = 5;
/// Samples per segment: 30 s at 100 Hz.
pub const SEGMENT_SAMPLES: usize = 3000;
/// Kernel widths of the seven convolution layers.
pub const CONV_KERNELS: [usize; 7] = [7, 7, 5, 5, 4, 4, 3];
/// Filters per convolution layer.
pub const FILTERS: usize = 20;
/// Dropout rate on the flattened features during training.
pub const DROPOUT_RATE: f64 = 0.5;
/// Flattened feature count entering the dense layer.
pub const FLATTEN_FEATURES: usize = 400;

/// Errors raised by model construction, inference, and weight files.
#[derive(Debug, Error)]
pub enum ModelError {
    /// The scorer accepts exactly 1 or 2 input channels.
    #[error("unsupported channel count {0}: the scorer takes 1 or 2 EEG channels")]
    UnsupportedChannelCount(usize),
    /// A weight file was written by an incompatible format revision.
    #[error("weight file format version {found} is not supported (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    /// A weight file is truncated, has a bad magic, or fails its checksum.
    #[error("corrupt weight file: {0}")]
    CorruptFile(String),
    /// Stored tensors do not match the architecture.
    #[error("weight shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Architecture description; everything except the channel count is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub n_channels: usize,
    pub conv_kernels: Vec<usize>,
    pub filters: usize,
    pub n_classes: usize,
    pub segment_samples: usize,
    pub dropout_rate: f64,
}

impl ModelSpec {
    /// Spec for a 1- or 2-channel scorer.
    pub fn for_channels(n_channels: usize) -> Result<Self> {
        if !(1..=2).contains(&n_channels) {
            return Err(ModelError::UnsupportedChannelCount(n_channels));
        }
        Ok(Self {
            n_channels,
            conv_kernels: CONV_KERNELS.to_vec(),
            filters: FILTERS,
            n_classes: N_CLASSES,
            segment_samples: SEGMENT_SAMPLES,
            dropout_rate: DROPOUT_RATE,
        })
    }

    /// Temporal length after each stage: the input length, then for every
    /// layer the post-convolution and post-pool lengths.
    ///
    /// `[3000, 2994, 1497, 1491, 745, 741, 370, 366, 183, 180, 90, 87, 43, 41, 20]`
    pub fn temporal_trace(&self) -> Vec<usize> {
        let mut trace = vec![self.segment_samples];
        let mut len = self.segment_samples;
        for &k in &self.conv_kernels {
            len = len - k + 1;
            trace.push(len);
            len /= 2;
            trace.push(len);
        }
        trace
    }

    /// Features entering the dense layer.
    pub fn flatten_features(&self) -> usize {
        self.filters * self.temporal_trace().last().copied().unwrap_or(0)
    }

    /// Total trainable parameters for this spec.
    pub fn param_count(&self) -> usize {
        let mut count = 0;
        let mut in_ch = self.n_channels;
        for &k in &self.conv_kernels {
            count += self.filters * in_ch * k + self.filters;
            in_ch = self.filters;
        }
        count + self.flatten_features() * self.n_classes + self.n_classes
    }
}

/// Where a trained model came from, carried inside the weight file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    /// Cross-validation fold (the held-out patient's fold id), if any.
    pub fold_id: Option<u32>,
    /// Channel configuration name, e.g. `fpz_cz`, `pz_oz`, `dual`.
    pub approach: Option<String>,
}

/// A scorer: spec plus weights plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub spec: ModelSpec,
    pub convs: Vec<Conv1d>,
    pub dense: Dense,
    /// Seed the weights were initialized from.
    pub seed: u64,
    pub provenance: Provenance,
}

/// Forward mode: inference, or training with an RNG for dropout.
pub enum Mode<'a> {
    Infer,
    Train(&'a mut SeededRng),
}

/// Every intermediate the backward pass needs, captured during forward.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each convolution layer (`layer_in[0]` is the segment).
    pub layer_in: Vec<Tensor>,
    /// Post-activation output of each convolution layer.
    pub conv_out: Vec<Tensor>,
    /// Pooling result (values and winner indices) of each layer.
    pub pooled: Vec<Pooled>,
    /// Per-element dropout factors applied to the flattened features.
    pub dropout_mask: Tensor,
    /// Flattened features after dropout: the dense layer's input.
    pub dense_in: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Loss gradients for all 16 parameter tensors, in [`ModelParams::param_names`]
/// order.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub tensors: Vec<Tensor>,
}

impl ModelGrads {
    pub fn zeros_like(model: &ModelParams) -> Self {
        Self {
            tensors: model.param_tensors().iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &ModelGrads) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "gradient sets of {} and {} tensors",
                self.tensors.len(),
                other.tensors.len()
            )));
        }
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.scale(s);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }
}

/// Builds a scorer with Glorot-uniform weights and zero biases.
///
/// Draws come from the seeded generator in a fixed order (layer by layer,
/// row-major within each kernel), so a seed pins the weights exactly.
/// Glorot's limit is `sqrt(6 / (fan_in + fan_out))` with the usual conv
/// fan-in/out of `in_channels * width` and `filters * width`.
pub fn build_model(n_channels: usize, seed: u64) -> Result<ModelParams> {
    let spec = ModelSpec::for_channels(n_channels)?;
    let mut rng = seeded(seed);
    let mut convs = Vec::with_capacity(spec.conv_kernels.len());
    let mut in_ch = spec.n_channels;
    for &k in &spec.conv_kernels {
        let fan_in = (in_ch * k) as f64;
        let fan_out = (spec.filters * k) as f64;
        let limit = (6.0 / (fan_in + fan_out)).sqrt();
        let kernel = Tensor::new(
            vec![spec.filters, in_ch, k],
            (0..spec.filters * in_ch * k).map(|_| rng.gen_range(-limit..limit)).collect(),
        )?;
        convs.push(Conv1d::new(kernel, Tensor::zeros(&[spec.filters]), Activation::Relu)?);
        in_ch = spec.filters;
    }
    let flat = spec.flatten_features();
    assert_eq!(flat, FLATTEN_FEATURES, "temporal trace must end in {FLATTEN_FEATURES} features");
    let limit = (6.0 / (flat + spec.n_classes) as f64).sqrt();
    let dense = Dense::new(
        Tensor::new(
            vec![flat, spec.n_classes],
            (0..flat * spec.n_classes).map(|_| rng.gen_range(-limit..limit)).collect(),
        )?,
        Tensor::zeros(&[spec.n_classes]),
    )?;
    let model = ModelParams { spec, convs, dense, seed, provenance: Provenance::default() };
    let expected = match n_channels {
        1 => 13_485,
        2 => 13_625,
        _ => unreachable!("channel count validated above"),
    };
    assert_eq!(model.count_params(), expected, "parameter count drifted from the architecture");
    Ok(model)
}

impl ModelParams {
    /// All parameter tensors in canonical order:
    /// `conv1.kernel, conv1.bias, ..., conv7.kernel, conv7.bias, dense.weights, dense.bias`.
    pub fn param_tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::with_capacity(2 * self.convs.len() + 2);
        for c in &self.convs {
            out.push(&c.kernel);
            out.push(&c.bias);
        }
        out.push(&self.dense.weights);
        out.push(&self.dense.bias);
        out
    }

    /// Mutable view of the same tensors, same order.
    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::with_capacity(2 * self.convs.len() + 2);
        for c in &mut self.convs {
            out.push(&mut c.kernel);
            out.push(&mut c.bias);
        }
        out.push(&mut self.dense.weights);
        out.push(&mut self.dense.bias);
        out
    }

    /// Canonical tensor names matching [`Self::param_tensors`].
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(2 * self.convs.len() + 2);
        for i in 1..=self.convs.len() {
            out.push(format!("conv{i}.kernel"));
            out.push(format!("conv{i}.bias"));
        }
        out.push("dense.weights".into());
        out.push("dense.bias".into());
        out
    }

    /// Total trainable parameter count.
    pub fn count_params(&self) -> usize {
        self.param_tensors().iter().map(|t| t.len()).sum()
    }

    fn check_input(&self, segment: &Tensor) -> Result<()> {
        let want = [self.spec.n_channels, self.spec.segment_samples];
        if segment.shape() != want {
            return Err(ModelError::ShapeMismatch(format!(
                "segment shape {:?}, model expects {:?}",
                segment.shape(),
                want
            )));
        }
        Ok(())
    }

    /// Full forward pass, retaining every intermediate for backward.
    pub fn forward_cached(&self, segment: &Tensor, mode: Mode) -> Result<ForwardCache> {
        self.check_input(segment)?;
        let n = self.convs.len();
        let mut layer_in = Vec::with_capacity(n);
        let mut conv_out = Vec::with_capacity(n);
        let mut pooled: Vec<Pooled> = Vec::with_capacity(n);
        let mut x = segment.clone();
        for conv in &self.convs {
            let y = conv.forward(&x)?;
            let p = max_pool2(&y)?;
            layer_in.push(x);
            conv_out.push(y);
            x = p.output.clone();
            pooled.push(p);
        }
        let flat = Tensor::from_vec(x.data().to_vec())?;
        let (dropped, dropout_mask) = match mode {
            Mode::Infer => {
                let mask = Tensor::new(flat.shape().to_vec(), vec![1.0; flat.len()])?;
                (flat, mask)
            }
            Mode::Train(rng) => dropout_forward(&flat, self.spec.dropout_rate, true, rng)?,
        };
        let dense_in = dropped.data().to_vec();
        let logits = self.dense.forward(&dense_in)?;
        let probs = softmax(&logits)?;
        Ok(ForwardCache { layer_in, conv_out, pooled, dropout_mask, dense_in, logits, probs })
    }

    /// Inference: class probabilities for a segment.
    pub fn forward(&self, segment: &Tensor) -> Result<Vec<f64>> {
        Ok(self.forward_cached(segment, Mode::Infer)?.probs)
    }

    /// Inference: `(class index, confidence)`. Ties go to the lower index.
    pub fn predict(&self, segment: &Tensor) -> Result<(usize, f64)> {
        let probs = self.forward(segment)?;
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Ok((best, probs[best]))
    }

    /// Backward pass from a cached forward: cross-entropy loss against the
    /// true class and gradients for every parameter tensor.
    pub fn backward(&self, cache: &ForwardCache, true_class: usize) -> Result<(f64, ModelGrads)> {
        if true_class >= self.spec.n_classes {
            return Err(ModelError::ShapeMismatch(format!(
                "class {true_class} out of range for {} classes",
                self.spec.n_classes
            )));
        }
        let target = one_hot(true_class, self.spec.n_classes);
        let (loss, dlogits) = cross_entropy(&target, &cache.probs)?;

        let dg = self.dense.backward(&cache.dense_in, &dlogits)?;
        let dflat = dropout_backward(&cache.dropout_mask, &Tensor::from_vec(dg.input)?)?;

        let n = self.convs.len();
        let last_shape = cache.pooled[n - 1].output.shape().to_vec();
        let mut d = Tensor::new(last_shape, dflat.data().to_vec())?;
        let mut conv_grads = Vec::with_capacity(n);
        for i in (0..n).rev() {
            let d_conv = max_pool2_backward(&cache.pooled[i], cache.conv_out[i].shape(), &d)?;
            let g = self.convs[i].backward(&cache.layer_in[i], &cache.conv_out[i], &d_conv)?;
            d = g.input.clone();
            conv_grads.push(g);
        }
        conv_grads.reverse();

        let mut tensors = Vec::with_capacity(2 * n + 2);
        for g in conv_grads {
            tensors.push(g.kernel);
            tensors.push(g.bias);
        }
        tensors.push(dg.weights);
        tensors.push(dg.bias);
        Ok((loss, ModelGrads { tensors }))
    }
}
