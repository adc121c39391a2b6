//! Sleep stage scoring on two-channel EEG.
//!
//! This crate reimplements a compact experiment pipeline end to end:
//!
//! * [`edf`] — a reader and synthetic writer for EDF/EDF+ files, including
//!   the annotation (TAL) channel that carries hypnograms.
//! * [`dataset`] — 30 s epoch construction from scored recordings, stage
//!   remapping, per-recording standardization, a binary segment cache, and
//!   leave-one-patient-out fold planning.
//! * [`nn`] — the small set of neural network operations the model needs
//!   (1D convolution, max pooling, dense, dropout, softmax, cross-entropy,
//!   Adam), written directly on `f64` buffers with hand-derived gradients.
//! * [`model`] — the 7-layer convolutional scorer itself, its initializer,
//!   forward/backward passes, and a checksummed weight file format.
//! * [`training`] — per-fold training with early stopping and the resumable
//!   cross-validation driver.
//! * [`eval`] — confusion matrices, accuracy / macro-F1 / Cohen's kappa,
//!   majority-vote ensembling, and per-fold result tables.
//! * [`stats`] — the normality screen (Kolmogorov-Smirnov against a fitted
//!   normal) and the Wilcoxon signed-rank test used to compare approaches.
//!
//! Everything is deterministic under a caller-supplied seed: the only RNG is
//! the seedable [`rng::SeededRng`], and every shuffle, initialization, and
//! dropout mask draws from a stream derived from the run seed.

pub mod dataset;
pub mod edf;
pub mod eval;
pub mod model;
pub mod nn;
pub mod rng;
pub mod stats;
pub mod training;
