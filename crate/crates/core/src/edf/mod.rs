//! EDF/EDF+ reading and synthetic writing.
//!
//! EDF stores a 256-byte ASCII header, one 256-byte descriptor block per
//! signal (laid out field-major: all labels, then all transducer fields,
//! and so on), and then fixed-duration data records of interleaved 16-bit
//! little-endian two's-complement samples. Sample values map linearly from
//! their digital range to the physical range declared per signal.
//!
//! EDF+ adds an annotation channel labeled `EDF Annotations` whose bytes
//! encode TALs (time-stamped annotation lists): `onset` and optional
//! `duration` in ASCII seconds, followed by one or more annotation texts,
//! with `0x15`/`0x14` separators and a `0x00` terminator. Hypnograms ride
//! in those annotations.
//!
//! Parsing is strict: truncation, malformed TALs, and inconsistent header
//! arithmetic are errors, never silently repaired. The writer exists to
//! fabricate small, fully valid files for tests and round-trips exactly
//! through the parser.

pub mod parse;
pub mod tal;
pub mod write;

pub use parse::{effective_record_count, parse_annotations, parse_header, read_signal};
pub use write::write_synthetic_edf;

use chrono::NaiveDateTime;
use thiserror::Error;

/// Errors raised while reading or writing EDF files.
#[derive(Debug, Error)]
pub enum EdfError {
    /// The file ends inside the header area.
    #[error("truncated header: need {needed} bytes, file has {got}")]
    TruncatedHeader { needed: usize, got: usize },
    /// A numeric header field does not parse.
    #[error("non-numeric header field {field}: {value:?}")]
    NonNumericField { field: &'static str, value: String },
    /// A header value is numeric but impossible (bad date, negative duration, ...).
    #[error("invalid header value: {0}")]
    InvalidHeaderValue(String),
    /// The declared header size disagrees with `256 * (1 + n_signals)`.
    #[error("header declares {declared} bytes but the signal count implies {expected}")]
    InconsistentHeaderSize { declared: usize, expected: usize },
    /// A per-signal field violates the format's constraints.
    #[error("invalid signal specification: {0}")]
    InvalidSignalSpec(String),
    /// No signal carries the requested label.
    #[error("no signal labeled {0:?}")]
    UnknownLabel(String),
    /// The data area ends before the declared records do.
    #[error("truncated data: {0}")]
    TruncatedRecord(String),
    /// An annotation chunk violates the TAL grammar.
    #[error("malformed annotation (TAL): {0}")]
    MalformedTal(String),
    /// A TAL onset is not a signed decimal number.
    #[error("non-numeric annotation onset: {0:?}")]
    NonNumericOnset(String),
    /// A physical value falls outside the digital range when writing.
    #[error("sample out of digital range: {0}")]
    RangeOverflow(String),
    /// A formatted header field does not fit its fixed-width slot.
    #[error("header field does not fit: {0}")]
    FieldTooWide(String),
}

pub type Result<T> = std::result::Result<T, EdfError>;

/// The fixed part of an EDF header.
#[derive(Debug, Clone, PartialEq)]
pub struct EdfHeader {
    /// Format version field, `"0"` for EDF/EDF+.
    pub version: String,
    pub patient_info: String,
    pub recording_info: String,
    pub start_datetime: NaiveDateTime,
    /// Total header size in bytes, `256 * (1 + n_signals)`.
    pub header_bytes: usize,
    /// Reserved field; `"EDF+C"` marks a contiguous EDF+ file.
    pub reserved: String,
    /// Declared record count; `-1` means "unknown, derive from file size".
    pub n_data_records: i64,
    /// Duration of one data record in seconds.
    pub record_duration: f64,
    pub n_signals: usize,
}

/// One signal's descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
    pub reserved: String,
}

/// Label that marks an EDF+ annotation channel.
pub const ANNOTATION_LABEL: &str = "EDF Annotations";

impl SignalSpec {
    /// True for the EDF+ annotation pseudo-signal.
    pub fn is_annotation(&self) -> bool {
        self.label == ANNOTATION_LABEL
    }

    /// Samples per second given the record duration.
    pub fn sampling_rate(&self, record_duration: f64) -> f64 {
        self.samples_per_record as f64 / record_duration
    }

    /// The linear digital-to-physical map:
    /// `physical_min + (d - digital_min) * (physical_max - physical_min) / (digital_max - digital_min)`.
    pub fn digital_to_physical(&self, d: i32) -> f64 {
        self.physical_min
            + (d - self.digital_min) as f64 * (self.physical_max - self.physical_min)
                / (self.digital_max - self.digital_min) as f64
    }

    /// Inverse of [`Self::digital_to_physical`], rounded to the nearest
    /// integer; errors when the result leaves the digital range.
    pub fn physical_to_digital(&self, p: f64) -> Result<i32> {
        let exact = (p - self.physical_min) * (self.digital_max - self.digital_min) as f64
            / (self.physical_max - self.physical_min)
            + self.digital_min as f64;
        let d = exact.round();
        if !d.is_finite() || d < self.digital_min as f64 || d > self.digital_max as f64 {
            return Err(EdfError::RangeOverflow(format!(
                "{p} maps to {exact}, outside [{}, {}] for signal {:?}",
                self.digital_min, self.digital_max, self.label
            )));
        }
        Ok(d as i32)
    }
}

/// One annotation: onset and duration in seconds plus its text.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationEvent {
    pub onset_seconds: f64,
    /// Zero when the TAL carried no duration field.
    pub duration_seconds: f64,
    pub text: String,
}

/// A decoded channel: physical samples at a uniform rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub label: String,
    pub samples: Vec<f64>,
    pub sampling_rate: f64,
}

/// An in-memory recording: identity, channels, and scored events sorted by
/// onset.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub patient_id: u32,
    pub night: u32,
    pub channels: Vec<Channel>,
    pub events: Vec<AnnotationEvent>,
}

impl Recording {
    /// Looks a channel up by exact label.
    pub fn channel(&self, label: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.label == label)
    }
}
