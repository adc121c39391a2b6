//! Scoring: confusion matrices, the headline metrics, majority voting, and
//! per-fold result plumbing.
//!
//! Truth always has one of the five stages; a prediction may instead be
//! "unclassified" when an ensemble vote ties. The confusion matrix keeps a
//! sixth column for those, and every derived metric counts them as plain
//! errors; `classified_accuracy` and `coverage` report what happens if they
//! are set aside instead.

use crate::dataset::{extract_input, Approach, DatasetError, Segment};
use crate::model::{ModelError, ModelParams};
use crate::stats::{mean, sample_std, StatsError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

/// Number of real stages (the unclassified column is extra).
pub const N_CLASSES: usize = 5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class index {0} outside 0..5")]
    ClassOutOfRange(usize),
    #[error("metric needs a non-empty confusion matrix")]
    EmptyMatrix,
    #[error("no class present in truth or predictions, macro F1 is undefined")]
    NoClassesPresent,
    #[error("chance agreement is 1, kappa is undefined")]
    DegenerateAgreement,
    #[error("majority vote needs at least one voter")]
    EmptyVoterList,
    #[error("segment patient {patient} night {night} index {index} is Excluded and cannot be scored")]
    ExcludedSegment { patient: u32, night: u32, index: u32 },
    #[error("model expects {expected} input channels, approach supplies {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("results csv line {line}: {message}")]
    CsvFormat { line: usize, message: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// 5x6 confusion matrix: rows are true stages, columns 0..5 are predicted
/// stages, column 5 counts unclassified (tied-vote) segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N_CLASSES + 1]; N_CLASSES],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one scored segment; `None` means the prediction tied.
    pub fn record(&mut self, truth: usize, pred: Option<usize>) -> Result<()> {
        if truth >= N_CLASSES {
            return Err(EvalError::ClassOutOfRange(truth));
        }
        let col = match pred {
            Some(p) if p >= N_CLASSES => return Err(EvalError::ClassOutOfRange(p)),
            Some(p) => p,
            None => N_CLASSES,
        };
        self.counts[truth][col] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn diagonal(&self) -> u64 {
        (0..N_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    fn unclassified(&self) -> u64 {
        self.counts.iter().map(|row| row[N_CLASSES]).sum()
    }

    fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    /// Column sum over the five real prediction columns.
    fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }

    /// Fraction of segments that received any (non-tied) prediction.
    pub fn coverage(&self) -> Result<f64> {
        let n = self.total();
        if n == 0 {
            return Err(EvalError::EmptyMatrix);
        }
        Ok((n - self.unclassified()) as f64 / n as f64)
    }

    /// Correct over all segments; unclassified ones count as errors.
    pub fn accuracy(&self) -> Result<f64> {
        let n = self.total();
        if n == 0 {
            return Err(EvalError::EmptyMatrix);
        }
        Ok(self.diagonal() as f64 / n as f64)
    }

    /// Correct over the classified segments only; `None` when every
    /// segment tied (nothing was classified). Empty matrices still error.
    pub fn classified_accuracy(&self) -> Result<Option<f64>> {
        if self.total() == 0 {
            return Err(EvalError::EmptyMatrix);
        }
        let classified = self.total() - self.unclassified();
        if classified == 0 {
            return Ok(None);
        }
        Ok(Some(self.diagonal() as f64 / classified as f64))
    }

    /// Per-class F1 = 2tp / (2tp + fp + fn). `None` for a class absent from
    /// both truth and predictions (0/0); a class that was predicted but
    /// never true, or true but never predicted, scores 0.
    pub fn f1_per_class(&self) -> [Option<f64>; N_CLASSES] {
        std::array::from_fn(|c| {
            let tp = self.counts[c][c];
            let fp = self.col_sum(c) - tp;
            let fne = self.row_sum(c) - tp;
            if tp + fp + fne == 0 {
                None
            } else {
                Some(2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fne as f64))
            }
        })
    }

    /// Mean F1 over the classes that appear at all.
    pub fn f1_macro(&self) -> Result<f64> {
        let per_class = self.f1_per_class();
        let present: Vec<f64> = per_class.iter().flatten().copied().collect();
        if present.is_empty() {
            return Err(EvalError::NoClassesPresent);
        }
        Ok(present.iter().sum::<f64>() / present.len() as f64)
    }

    /// Cohen's kappa. Chance agreement uses the marginals of the five real
    /// classes; the unclassified column contributes observed disagreement
    /// but no chance mass.
    pub fn cohen_kappa(&self) -> Result<f64> {
        let n = self.total();
        if n == 0 {
            return Err(EvalError::EmptyMatrix);
        }
        let n = n as f64;
        let p_o = self.diagonal() as f64 / n;
        let p_e: f64 = (0..N_CLASSES)
            .map(|c| (self.row_sum(c) as f64 / n) * (self.col_sum(c) as f64 / n))
            .sum();
        if (1.0 - p_e).abs() < 1e-15 {
            return Err(EvalError::DegenerateAgreement);
        }
        Ok((p_o - p_e) / (1.0 - p_e))
    }
}

/// Outcome of a majority vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteOutcome {
    Class(usize),
    /// No strict plurality; the segment stays unclassified.
    Tie,
}

/// Majority vote over class indices. A strict plurality wins; any tie for
/// the top count is a [`VoteOutcome::Tie`].
pub fn majority_vote(votes: &[usize]) -> Result<VoteOutcome> {
    if votes.is_empty() {
        return Err(EvalError::EmptyVoterList);
    }
    let mut tally = [0usize; N_CLASSES];
    for &v in votes {
        if v >= N_CLASSES {
            return Err(EvalError::ClassOutOfRange(v));
        }
        tally[v] += 1;
    }
    let top = *tally.iter().max().expect("five classes");
    let winners: Vec<usize> = (0..N_CLASSES).filter(|&c| tally[c] == top).collect();
    match winners.as_slice() {
        [single] => Ok(VoteOutcome::Class(*single)),
        _ => Ok(VoteOutcome::Tie),
    }
}

/// Everything measured on one fold's test patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_id: u32,
    pub approach: String,
    pub accuracy: f64,
    pub kappa: f64,
    pub f1_macro: f64,
    /// 1.0 for single models; ensembles lose tied segments.
    pub coverage: f64,
    /// `None` when coverage is zero.
    pub classified_accuracy: Option<f64>,
    pub confusion: ConfusionMatrix,
}

impl FoldResult {
    fn from_confusion(fold_id: u32, approach: String, confusion: ConfusionMatrix) -> Result<Self> {
        Ok(FoldResult {
            fold_id,
            approach,
            accuracy: confusion.accuracy()?,
            kappa: confusion.cohen_kappa()?,
            f1_macro: confusion.f1_macro()?,
            coverage: confusion.coverage()?,
            classified_accuracy: confusion.classified_accuracy()?,
            confusion,
        })
    }

    pub fn row(&self) -> FoldRow {
        FoldRow {
            fold_id: self.fold_id,
            approach: self.approach.clone(),
            accuracy: self.accuracy,
            kappa: self.kappa,
            f1_macro: self.f1_macro,
            coverage: self.coverage,
        }
    }
}

fn class_of(segment: &Segment) -> Result<usize> {
    segment.label.class_index().ok_or(EvalError::ExcludedSegment {
        patient: segment.patient_id,
        night: segment.night,
        index: segment.index,
    })
}

/// Scores one model on a test set. `stored_labels` names the channel rows
/// of the stored segments so the approach can pick its rows.
pub fn evaluate_single(
    model: &ModelParams,
    approach: Approach,
    segments: &[Segment],
    stored_labels: &[String],
    fold_id: u32,
) -> Result<FoldResult> {
    if model.spec.n_channels != approach.n_channels() {
        return Err(EvalError::ChannelMismatch {
            expected: model.spec.n_channels,
            got: approach.n_channels(),
        });
    }
    let rows = approach.channel_indices(stored_labels)?;
    let mut confusion = ConfusionMatrix::new();
    for segment in segments {
        let truth = class_of(segment)?;
        let input = extract_input(segment, &rows)?;
        let (pred, _) = model.predict(&input)?;
        confusion.record(truth, Some(pred))?;
    }
    FoldResult::from_confusion(fold_id, approach.name().to_string(), confusion)
}

/// Scores a majority-vote ensemble of per-approach models on a test set.
/// Tied segments are recorded as unclassified.
pub fn evaluate_ensemble(
    members: &[(&ModelParams, Approach)],
    segments: &[Segment],
    stored_labels: &[String],
    fold_id: u32,
) -> Result<FoldResult> {
    if members.is_empty() {
        return Err(EvalError::EmptyVoterList);
    }
    let mut rows = Vec::with_capacity(members.len());
    for (model, approach) in members {
        if model.spec.n_channels != approach.n_channels() {
            return Err(EvalError::ChannelMismatch {
                expected: model.spec.n_channels,
                got: approach.n_channels(),
            });
        }
        rows.push(approach.channel_indices(stored_labels)?);
    }
    let mut confusion = ConfusionMatrix::new();
    for segment in segments {
        let truth = class_of(segment)?;
        let mut votes = Vec::with_capacity(members.len());
        for ((model, _), row) in members.iter().zip(&rows) {
            let input = extract_input(segment, row)?;
            votes.push(model.predict(&input)?.0);
        }
        let pred = match majority_vote(&votes)? {
            VoteOutcome::Class(c) => Some(c),
            VoteOutcome::Tie => None,
        };
        confusion.record(truth, pred)?;
    }
    FoldResult::from_confusion(fold_id, "ensemble".to_string(), confusion)
}

/// One CSV row of per-fold results.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRow {
    pub fold_id: u32,
    pub approach: String,
    pub accuracy: f64,
    pub kappa: f64,
    pub f1_macro: f64,
    pub coverage: f64,
}

/// Header line of the per-fold results CSV.
pub const FOLD_ROW_HEADER: &str = "fold_id,approach,accuracy,kappa,f1_macro,coverage";

/// Renders rows as CSV. `f64` values use Rust's shortest round-trip
/// formatting, so reading the file back reproduces them bit for bit.
pub fn fold_rows_to_csv(rows: &[FoldRow]) -> Result<String> {
    let mut out = String::new();
    out.push_str(FOLD_ROW_HEADER);
    out.push('\n');
    for row in rows {
        if row.approach.contains(',') || row.approach.contains('\n') {
            return Err(EvalError::CsvFormat {
                line: 0,
                message: format!("approach name {:?} cannot be written to csv", row.approach),
            });
        }
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.fold_id, row.approach, row.accuracy, row.kappa, row.f1_macro, row.coverage
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// Parses per-fold results CSV. Lines starting with `#` and blank lines are
/// skipped; the first remaining line must be the exact header.
pub fn fold_rows_from_csv(text: &str) -> Result<Vec<FoldRow>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != FOLD_ROW_HEADER {
                return Err(EvalError::CsvFormat {
                    line: i + 1,
                    message: format!("expected header {FOLD_ROW_HEADER:?}, found {line:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(EvalError::CsvFormat {
                line: i + 1,
                message: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let parse_f64 = |field: &str, name: &str| -> Result<f64> {
            field.parse().map_err(|_| EvalError::CsvFormat {
                line: i + 1,
                message: format!("{name} {field:?} is not a number"),
            })
        };
        rows.push(FoldRow {
            fold_id: fields[0].parse().map_err(|_| EvalError::CsvFormat {
                line: i + 1,
                message: format!("fold_id {:?} is not an integer", fields[0]),
            })?,
            approach: fields[1].to_string(),
            accuracy: parse_f64(fields[2], "accuracy")?,
            kappa: parse_f64(fields[3], "kappa")?,
            f1_macro: parse_f64(fields[4], "f1_macro")?,
            coverage: parse_f64(fields[5], "coverage")?,
        });
    }
    if !saw_header {
        return Err(EvalError::CsvFormat { line: 0, message: "no header line found".into() });
    }
    Ok(rows)
}

pub fn write_fold_rows(path: &Path, rows: &[FoldRow]) -> Result<()> {
    fs::write(path, fold_rows_to_csv(rows)?)?;
    Ok(())
}

pub fn read_fold_rows(path: &Path) -> Result<Vec<FoldRow>> {
    fold_rows_from_csv(&fs::read_to_string(path)?)
}

/// Writes the full per-fold results (confusion matrices included) as JSON,
/// the machine-readable sidecar to the CSV.
pub fn write_fold_results_json(path: &Path, results: &[FoldResult]) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(results)?)?;
    Ok(())
}

pub fn read_fold_results_json(path: &Path) -> Result<Vec<FoldResult>> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Mean and sample standard deviation of one metric across folds.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample (n-1) standard deviation; `None` with fewer than two folds.
    pub std: Option<f64>,
}

/// Per-approach summaries of accuracy, kappa, macro F1, and coverage, keyed
/// by approach name in sorted order.
pub fn aggregate_by_approach(
    rows: &[FoldRow],
) -> Result<BTreeMap<String, [MetricSummary; 4]>> {
    let mut grouped: BTreeMap<String, Vec<&FoldRow>> = BTreeMap::new();
    for row in rows {
        grouped.entry(row.approach.clone()).or_default().push(row);
    }
    let mut out = BTreeMap::new();
    for (approach, rows) in grouped {
        let metrics: [Vec<f64>; 4] = [
            rows.iter().map(|r| r.accuracy).collect(),
            rows.iter().map(|r| r.kappa).collect(),
            rows.iter().map(|r| r.f1_macro).collect(),
            rows.iter().map(|r| r.coverage).collect(),
        ];
        let summaries = metrics.map(|values| MetricSummary {
            n: values.len(),
            mean: mean(&values).expect("group is non-empty"),
            std: sample_std(&values).ok(),
        });
        out.insert(approach, summaries);
    }
    Ok(out)
}

/// Names for the four summary slots of [`aggregate_by_approach`].
pub const SUMMARY_METRICS: [&str; 4] = ["accuracy", "kappa", "f1_macro", "coverage"];
