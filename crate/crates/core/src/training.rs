//! Per-fold training with early stopping, and the full leave-one-patient-out
//! run with resumable on-disk artifacts.
//!
//! One training pass: shuffle the training indices, take batches of
//! `batch_size` (the final short batch is kept), average each batch's
//! per-sample gradients, and apply one Adam step per batch. After every
//! pass the validation split is scored; the weights with the lowest
//! validation loss so far are snapshotted and restored at the end, and
//! training stops once `patience` passes go by without a new best.
//!
//! Randomness is split into two decorrelated streams per fold: weight
//! initialization uses the fold seed itself, while shuffling and dropout
//! share a generator derived from it, so changing one use never silently
//! shifts the other.

use crate::dataset::{extract_input, Approach, DatasetError, FoldPlan, Segment, StandardizeMode};
use crate::model::{build_model, save_model, ModelError, ModelGrads, ModelParams, Mode, Provenance};
use crate::nn::{AdamState, NnError};
use crate::rng::{derive, seeded};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// RNG stream id for shuffling and dropout (see [`crate::rng::derive`]).
const TRAIN_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("fold {fold_id} has an empty {split} split")]
    EmptySplit { split: &'static str, fold_id: u32 },
    #[error("non-finite loss or gradient in fold {fold_id}, pass {epoch}, batch {batch}")]
    NonFiniteLoss { fold_id: u32, epoch: usize, batch: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// Training hyperparameters. The defaults are the published protocol:
/// Adam at 0.001, batches of 20, up to 100 passes, patience 10, 10% of the
/// training patients' segments held out for validation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub approach: Approach,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Passes without a validation-loss improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    /// Base seed; fold `k` trains with `seed + k`.
    pub seed: u64,
    pub standardize: StandardizeMode,
}

impl TrainConfig {
    pub fn new(approach: Approach) -> Self {
        TrainConfig {
            approach,
            learning_rate: 0.001,
            batch_size: 20,
            max_epochs: 100,
            patience: 10,
            validation_fraction: 0.10,
            seed: 1,
            standardize: StandardizeMode::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig(format!(
                "learning rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(TrainError::InvalidConfig("max epochs must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(TrainError::InvalidConfig("patience must be at least 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(TrainError::InvalidConfig(format!(
                "validation fraction {} must lie in (0, 1)",
                self.validation_fraction
            )));
        }
        Ok(())
    }

    /// The config fold `fold_id` actually trains with.
    pub fn for_fold(&self, fold_id: u32) -> TrainConfig {
        TrainConfig { seed: self.seed.wrapping_add(fold_id as u64), ..self.clone() }
    }
}

/// One training pass's losses and validation accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `patience` passes went by without a validation improvement.
    EarlyStopped,
    /// The pass budget ran out first.
    MaxEpochs,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::EarlyStopped => "early_stopped",
            StopReason::MaxEpochs => "max_epochs",
        }
    }
}

/// The full loss trajectory of one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based pass whose weights were kept.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

/// Patience arithmetic, separated out so it can be tested exactly.
///
/// Only a strict improvement of the watched value resets the counter.
#[derive(Debug, Clone)]
pub struct EarlyStopTracker {
    patience: usize,
    best: f64,
    best_epoch: usize,
    epochs_seen: usize,
    since_best: usize,
}

impl EarlyStopTracker {
    pub fn new(patience: usize) -> Self {
        EarlyStopTracker {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            epochs_seen: 0,
            since_best: 0,
        }
    }

    /// Feeds the next pass's validation loss. Returns `(improved, stop)`.
    pub fn observe(&mut self, val_loss: f64) -> (bool, bool) {
        self.epochs_seen += 1;
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = self.epochs_seen;
            self.since_best = 0;
            (true, false)
        } else {
            self.since_best += 1;
            (false, self.since_best >= self.patience)
        }
    }

    /// 1-based pass of the best value seen; 0 before any observation.
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_value(&self) -> f64 {
        self.best
    }
}

/// Mean cross-entropy loss and accuracy of `model` over the given segment
/// indices, in inference mode.
fn score_split(
    model: &ModelParams,
    segments: &[Segment],
    indices: &[usize],
    rows: &[usize],
) -> Result<(f64, f64)> {
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for &i in indices {
        let segment = &segments[i];
        let class = segment.label.class_index().ok_or(DatasetError::Inconsistent(format!(
            "segment patient {} night {} index {} is Excluded",
            segment.patient_id, segment.night, segment.index
        )))?;
        let input = extract_input(segment, rows)?;
        let probs = model.forward(&input)?;
        loss_sum += -probs[class].ln();
        let (pred, _) = model.predict(&input)?;
        if pred == class {
            correct += 1;
        }
    }
    let n = indices.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

/// Trains one fold and returns the best-validation weights plus history.
///
/// `stored_labels` names the channel rows of the stored segments, so the
/// configured approach can pick its input rows.
pub fn train_fold(
    segments: &[Segment],
    stored_labels: &[String],
    fold: &FoldPlan,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    if fold.train.is_empty() {
        return Err(TrainError::EmptySplit { split: "train", fold_id: fold.fold_id });
    }
    if fold.validation.is_empty() {
        return Err(TrainError::EmptySplit { split: "validation", fold_id: fold.fold_id });
    }
    let rows = config.approach.channel_indices(stored_labels)?;

    let mut model = build_model(config.approach.n_channels(), config.seed)?;
    let mut adam = AdamState::new(&model.param_tensors(), config.learning_rate);
    let mut rng = seeded(derive(config.seed, TRAIN_STREAM));
    let mut tracker = EarlyStopTracker::new(config.patience);
    let mut best: Option<ModelParams> = None;
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    let mut order: Vec<usize> = fold.train.clone();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads = ModelGrads::zeros_like(&model);
            let mut batch_loss = 0.0;
            for &i in batch {
                let segment = &segments[i];
                let class = segment.label.class_index().ok_or(DatasetError::Inconsistent(
                    format!(
                        "segment patient {} night {} index {} is Excluded",
                        segment.patient_id, segment.night, segment.index
                    ),
                ))?;
                let input = extract_input(segment, &rows)?;
                let cache = model.forward_cached(&input, Mode::Train(&mut rng))?;
                let (loss, sample_grads) = model.backward(&cache, class)?;
                batch_loss += loss;
                grads.add_assign(&sample_grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            if !(batch_loss.is_finite() && grads.all_finite()) {
                return Err(TrainError::NonFiniteLoss {
                    fold_id: fold.fold_id,
                    epoch,
                    batch: batch_no,
                });
            }
            adam.step(&mut model.param_tensors_mut(), &grads.tensors)?;
            loss_sum += batch_loss;
        }
        let train_loss = loss_sum / order.len() as f64;
        let (val_loss, val_acc) = score_split(&model, segments, &fold.validation, &rows)?;
        epochs.push(EpochRecord { train_loss, val_loss, val_acc });

        let (improved, stop) = tracker.observe(val_loss);
        if improved {
            best = Some(model.clone());
        }
        if stop {
            stop_reason = StopReason::EarlyStopped;
            break;
        }
    }

    let mut model = best.expect("the first pass always improves on infinity");
    model.provenance = Provenance {
        fold_id: Some(fold.fold_id),
        approach: Some(config.approach.name().to_string()),
    };
    Ok((model, TrainHistory { epochs, best_epoch: tracker.best_epoch(), stop_reason }))
}

/// Renders a history as CSV. The kept pass and the stop reason ride along
/// as `#` comments above the header.
pub fn history_to_csv(history: &TrainHistory) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# best_epoch={}", history.best_epoch);
    let _ = writeln!(out, "# stop_reason={}", history.stop_reason.name());
    out.push_str("epoch,train_loss,val_loss,val_acc\n");
    for (i, e) in history.epochs.iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{}", i + 1, e.train_loss, e.val_loss, e.val_acc);
    }
    out
}

/// File names of one fold's artifacts inside an output directory.
pub fn fold_paths(out_dir: &Path, approach: Approach, fold_id: u32) -> (PathBuf, PathBuf) {
    let stem = format!("{}_fold{:02}", approach.name(), fold_id);
    (out_dir.join(format!("{stem}.model")), out_dir.join(format!("{stem}_history.csv")))
}

/// What [`run_loocv`] did for one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldArtifacts {
    pub fold_id: u32,
    pub model_path: PathBuf,
    pub history_path: PathBuf,
    /// True when an existing model file was kept instead of retraining.
    pub skipped: bool,
}

/// The run manifest written next to the fold artifacts: everything needed
/// to reproduce or audit a run. Deliberately free of timestamps so a rerun
/// produces identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub approach: String,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub base_seed: u64,
    pub standardize: String,
    pub n_segments: usize,
    /// Checksum of the prepared-segment container this run trained on.
    pub data_sha256: Option<String>,
    pub folds: Vec<ManifestFold>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFold {
    pub fold_id: u32,
    pub test_patient: u32,
    pub seed: u64,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
}

pub fn manifest_path(out_dir: &Path, approach: Approach) -> PathBuf {
    out_dir.join(format!("{}_manifest.json", approach.name()))
}

/// Trains every fold (in parallel) and writes per-fold artifacts plus a run
/// manifest.
///
/// Folds whose model file already exists are skipped unless `force` is set,
/// so an interrupted run resumes where it stopped. Each fold seeds its own
/// generators from `config.seed + fold_id`, which makes results independent
/// of scheduling and of which folds were skipped.
pub fn run_loocv(
    segments: &[Segment],
    stored_labels: &[String],
    folds: &[FoldPlan],
    config: &TrainConfig,
    out_dir: &Path,
    force: bool,
    data_sha256: Option<String>,
) -> Result<Vec<FoldArtifacts>> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;

    let artifacts: Vec<FoldArtifacts> = folds
        .par_iter()
        .map(|fold| -> Result<FoldArtifacts> {
            let (model_path, history_path) = fold_paths(out_dir, config.approach, fold.fold_id);
            if !force && model_path.exists() {
                return Ok(FoldArtifacts {
                    fold_id: fold.fold_id,
                    model_path,
                    history_path,
                    skipped: true,
                });
            }
            let fold_config = config.for_fold(fold.fold_id);
            let (model, history) = train_fold(segments, stored_labels, fold, &fold_config)?;
            save_model(&model, &model_path)?;
            fs::write(&history_path, history_to_csv(&history))?;
            Ok(FoldArtifacts { fold_id: fold.fold_id, model_path, history_path, skipped: false })
        })
        .collect::<Result<_>>()?;

    let manifest = RunManifest {
        approach: config.approach.name().to_string(),
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        max_epochs: config.max_epochs,
        patience: config.patience,
        validation_fraction: config.validation_fraction,
        base_seed: config.seed,
        standardize: config.standardize.name().to_string(),
        n_segments: segments.len(),
        data_sha256,
        folds: folds
            .iter()
            .map(|f| ManifestFold {
                fold_id: f.fold_id,
                test_patient: f.test_patient,
                seed: config.seed.wrapping_add(f.fold_id as u64),
                n_train: f.train.len(),
                n_validation: f.validation.len(),
                n_test: f.test.len(),
            })
            .collect(),
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    fs::write(manifest_path(out_dir, config.approach), json)?;
    Ok(artifacts)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}
