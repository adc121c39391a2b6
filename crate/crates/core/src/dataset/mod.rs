//! From scored recordings to trainable segments and fold plans.
//!
//! The pipeline: remap hypnogram texts onto the modern five-stage scheme,
//! cut every scored event into 30 s windows of 3000 samples, optionally
//! standardize per recording, cache the result in a deterministic binary
//! container, and plan leave-one-patient-out folds with a stratified
//! validation split carved from the training patients.

pub mod cache;
pub mod corpus;
pub mod folds;
pub mod segment;

pub use cache::{decode_cache, encode_cache, read_cache, write_cache};
pub use corpus::{load_recording, prepare_dataset, scan_corpus, CorpusScan, PrepareSummary, RecordingFiles};
pub use folds::{
    build_folds, leave_one_out_folds, FoldPlan, DEFAULT_VALIDATION_FRACTION, STUDY_PATIENTS,
};
pub use segment::{segment_recording, standardize, Segmentation};

use crate::edf::EdfError;
use crate::nn::{NnError, Tensor};
use thiserror::Error;

/// Samples per channel in one segment: 30 s at 100 Hz.
pub const SEGMENT_SAMPLES: usize = 3000;
/// Window length in seconds.
pub const SEGMENT_SECONDS: f64 = 30.0;
/// Sampling rate the pipeline requires of its EEG channels.
pub const REQUIRED_RATE_HZ: f64 = 100.0;
/// The two EEG derivations the corpus provides.
pub const FPZ_CZ: &str = "EEG Fpz-Cz";
pub const PZ_OZ: &str = "EEG Pz-Oz";

/// Errors raised across the dataset pipeline.
#[derive(Debug, Error)]
pub enum DatasetError {
    /// An annotation text outside the eight known hypnogram strings.
    #[error("unknown annotation text {0:?}")]
    UnknownAnnotationText(String),
    /// A required channel is absent from a recording.
    #[error("recording SC patient {patient} night {night} has no channel {label:?}")]
    MissingChannel { label: String, patient: u32, night: u32 },
    /// A channel's sampling rate is not the required 100 Hz.
    #[error("channel {label:?} runs at {got} Hz, pipeline requires {expected} Hz")]
    RateMismatch { label: String, expected: f64, got: f64 },
    /// A scored event is unusable (negative onset and similar).
    #[error("bad scored event: {0}")]
    BadEvent(String),
    /// A recording-channel is constant, so z-scoring would divide by zero.
    #[error("zero variance in patient {patient} night {night} channel {channel:?}")]
    ZeroVariance { patient: u32, night: u32, channel: String },
    /// The full study design needs exactly 20 patients.
    #[error("expected exactly {expected} patients, found {got}")]
    WrongPatientCount { expected: usize, got: usize },
    /// Leave-one-out needs at least two patients.
    #[error("leave-one-out needs at least 2 patients, found {0}")]
    TooFewPatients(usize),
    /// Segment shapes disagree within one dataset.
    #[error("inconsistent segments: {0}")]
    Inconsistent(String),
    /// A cache file was written by an incompatible format revision.
    #[error("segment cache version {found} is not supported (this build reads version {expected})")]
    CacheVersion { found: u32, expected: u32 },
    /// A cache file is truncated or structurally invalid.
    #[error("corrupt segment cache: {0}")]
    CacheFormat(String),
    /// A cache label byte outside the five trainable stages.
    #[error("invalid stage byte {0} in segment cache")]
    InvalidLabelByte(u8),
    /// A recording has no hypnogram annotations anywhere.
    #[error("no hypnogram annotations for patient {patient} night {night} (checked the PSG file and its companion)")]
    NoHypnogram { patient: u32, night: u32 },
    #[error(transparent)]
    Edf(#[from] EdfError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// Sleep stage of one segment, after remapping to the five-stage scheme.
///
/// `Excluded` covers movement time and unscored epochs; such segments are
/// surfaced by segmentation (so they can be counted) but never reach a
/// training, validation, or test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StageLabel {
    Wake,
    N1,
    N2,
    N3,
    Rem,
    Excluded,
}

impl StageLabel {
    /// The five trainable stages, in class-index order.
    pub const TRAINABLE: [StageLabel; 5] =
        [StageLabel::Wake, StageLabel::N1, StageLabel::N2, StageLabel::N3, StageLabel::Rem];

    /// Class index 0..5, or None for `Excluded`.
    pub fn class_index(self) -> Option<usize> {
        match self {
            StageLabel::Wake => Some(0),
            StageLabel::N1 => Some(1),
            StageLabel::N2 => Some(2),
            StageLabel::N3 => Some(3),
            StageLabel::Rem => Some(4),
            StageLabel::Excluded => None,
        }
    }

    /// Inverse of [`Self::class_index`].
    pub fn from_class_index(i: usize) -> Option<StageLabel> {
        Self::TRAINABLE.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            StageLabel::Wake => "W",
            StageLabel::N1 => "N1",
            StageLabel::N2 => "N2",
            StageLabel::N3 => "N3",
            StageLabel::Rem => "REM",
            StageLabel::Excluded => "EXCLUDED",
        }
    }
}

impl std::fmt::Display for StageLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps a hypnogram annotation text onto the five-stage scheme.
///
/// The classic four-stage scoring's stages 3 and 4 merge into N3. Exactly
/// eight texts are legal; anything else is a hard error so corpus drift is
/// caught loudly rather than silently dropped. Matching is byte-exact and
/// case-sensitive.
pub fn remap_label(text: &str) -> Result<StageLabel> {
    match text {
        "Sleep stage W" => Ok(StageLabel::Wake),
        "Sleep stage 1" => Ok(StageLabel::N1),
        "Sleep stage 2" => Ok(StageLabel::N2),
        "Sleep stage 3" => Ok(StageLabel::N3),
        "Sleep stage 4" => Ok(StageLabel::N3),
        "Sleep stage R" => Ok(StageLabel::Rem),
        "Movement time" => Ok(StageLabel::Excluded),
        "Sleep stage ?" => Ok(StageLabel::Excluded),
        other => Err(DatasetError::UnknownAnnotationText(other.to_string())),
    }
}

/// One 30 s labeled window.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub patient_id: u32,
    pub night: u32,
    /// 30 s epoch position from the start of the recording.
    pub index: u32,
    pub label: StageLabel,
    /// Samples as `[n_channels, 3000]`.
    pub samples: Tensor,
}

/// Channel configuration under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approach {
    FpzCz,
    PzOz,
    Dual,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::FpzCz, Approach::PzOz, Approach::Dual];

    pub fn name(self) -> &'static str {
        match self {
            Approach::FpzCz => "fpz_cz",
            Approach::PzOz => "pz_oz",
            Approach::Dual => "dual",
        }
    }

    pub fn from_name(name: &str) -> Option<Approach> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// EDF labels of the channels this approach consumes, in input order.
    pub fn channel_labels(self) -> &'static [&'static str] {
        match self {
            Approach::FpzCz => &[FPZ_CZ],
            Approach::PzOz => &[PZ_OZ],
            Approach::Dual => &[FPZ_CZ, PZ_OZ],
        }
    }

    pub fn n_channels(self) -> usize {
        self.channel_labels().len()
    }

    /// Resolves this approach's channels to row indices of a segment whose
    /// rows carry `stored_labels`.
    pub fn channel_indices(self, stored_labels: &[String]) -> Result<Vec<usize>> {
        self.channel_labels()
            .iter()
            .map(|want| {
                stored_labels.iter().position(|l| l == want).ok_or_else(|| {
                    DatasetError::MissingChannel {
                        label: (*want).to_string(),
                        patient: 0,
                        night: 0,
                    }
                })
            })
            .collect()
    }
}

impl std::fmt::Display for Approach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Copies the approach's channel rows out of a stored segment, in approach
/// order, yielding the model input `[n_channels, 3000]`.
pub fn extract_input(segment: &Segment, channel_rows: &[usize]) -> Result<Tensor> {
    let (stored_ch, len) = segment.samples.dims2()?;
    let mut data = Vec::with_capacity(channel_rows.len() * len);
    for &row in channel_rows {
        if row >= stored_ch {
            return Err(DatasetError::Inconsistent(format!(
                "channel row {row} out of range for a {stored_ch}-channel segment"
            )));
        }
        data.extend_from_slice(&segment.samples.data()[row * len..(row + 1) * len]);
    }
    Ok(Tensor::new(vec![channel_rows.len(), len], data)?)
}

/// Per-recording standardization choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StandardizeMode {
    /// Keep raw physical units.
    #[default]
    None,
    /// Subtract each recording-channel's mean and divide by its standard
    /// deviation, both computed across all of that recording's segments.
    PerRecordingZscore,
}

impl StandardizeMode {
    pub fn name(self) -> &'static str {
        match self {
            StandardizeMode::None => "none",
            StandardizeMode::PerRecordingZscore => "per_recording_zscore",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "none" => Some(StandardizeMode::None),
            "per_recording_zscore" => Some(StandardizeMode::PerRecordingZscore),
            _ => None,
        }
    }
}
