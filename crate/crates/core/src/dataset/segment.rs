//! Cutting scored recordings into 30 s windows.

use super::{
    remap_label, DatasetError, Result, Segment, StandardizeMode, REQUIRED_RATE_HZ,
    SEGMENT_SAMPLES, SEGMENT_SECONDS,
};
use crate::edf::Recording;
use crate::nn::Tensor;
use std::collections::BTreeMap;

/// Output of [`segment_recording`].
#[derive(Debug, Clone)]
pub struct Segmentation {
    /// All emitted windows, `Excluded` ones included; filtering is the
    /// caller's decision (so exclusions can still be counted).
    pub segments: Vec<Segment>,
    /// Windows that could not be cut: an event's sub-30 s remainder, or
    /// windows running past the end of a channel.
    pub dropped_windows: usize,
}

/// Cuts every scored event into non-overlapping 30 s windows across the
/// given channels.
///
/// Each event of duration `d` yields `floor(d / 30)` windows; a remainder
/// counts as dropped. A window needs all 3000 samples on every channel, so
/// hypnograms that outrun the signal drop their tail windows too (counted,
/// never zero-padded). Channels must exist and run at 100 Hz.
pub fn segment_recording(rec: &Recording, channel_labels: &[&str]) -> Result<Segmentation> {
    let mut channels = Vec::with_capacity(channel_labels.len());
    for &label in channel_labels {
        let ch = rec.channel(label).ok_or_else(|| DatasetError::MissingChannel {
            label: label.to_string(),
            patient: rec.patient_id,
            night: rec.night,
        })?;
        if (ch.sampling_rate - REQUIRED_RATE_HZ).abs() > 1e-9 {
            return Err(DatasetError::RateMismatch {
                label: label.to_string(),
                expected: REQUIRED_RATE_HZ,
                got: ch.sampling_rate,
            });
        }
        channels.push(ch);
    }
    let usable_len = channels.iter().map(|c| c.samples.len()).min().unwrap_or(0);

    let mut segments = Vec::new();
    let mut dropped_windows = 0usize;
    for event in &rec.events {
        let label = remap_label(&event.text)?;
        if event.onset_seconds < 0.0 {
            return Err(DatasetError::BadEvent(format!(
                "negative onset {} for {:?}",
                event.onset_seconds, event.text
            )));
        }
        let onset_sample = (event.onset_seconds * REQUIRED_RATE_HZ).round() as usize;
        let base_epoch = (event.onset_seconds / SEGMENT_SECONDS).round() as u32;
        let windows = (event.duration_seconds / SEGMENT_SECONDS).floor() as usize;
        if event.duration_seconds - windows as f64 * SEGMENT_SECONDS > 1e-9 {
            dropped_windows += 1;
        }
        for w in 0..windows {
            let start = onset_sample + w * SEGMENT_SAMPLES;
            let end = start + SEGMENT_SAMPLES;
            if end > usable_len {
                // This and every later window of the event runs off the
                // signal; count them and move on.
                dropped_windows += windows - w;
                break;
            }
            let mut data = Vec::with_capacity(channels.len() * SEGMENT_SAMPLES);
            for ch in &channels {
                data.extend_from_slice(&ch.samples[start..end]);
            }
            segments.push(Segment {
                patient_id: rec.patient_id,
                night: rec.night,
                index: base_epoch + w as u32,
                label,
                samples: Tensor::new(vec![channels.len(), SEGMENT_SAMPLES], data)?,
            });
        }
    }
    Ok(Segmentation { segments, dropped_windows })
}

/// Standardizes segments in place.
///
/// `PerRecordingZscore` computes one mean and one (population) standard
/// deviation per recording-channel across all of that recording's segments
/// present in the slice, then rescales, so statistics never leak across
/// recordings, let alone patients. A constant channel is an error.
pub fn standardize(segments: &mut [Segment], mode: StandardizeMode) -> Result<()> {
    match mode {
        StandardizeMode::None => Ok(()),
        StandardizeMode::PerRecordingZscore => zscore_per_recording(segments),
    }
}

fn zscore_per_recording(segments: &mut [Segment]) -> Result<()> {
    let mut groups: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, s) in segments.iter().enumerate() {
        groups.entry((s.patient_id, s.night)).or_default().push(i);
    }
    for ((patient, night), idxs) in groups {
        let (n_ch, len) = segments[idxs[0]].samples.dims2()?;
        for &i in &idxs {
            if segments[i].samples.shape() != [n_ch, len] {
                return Err(DatasetError::Inconsistent(format!(
                    "segment shapes differ within patient {patient} night {night}"
                )));
            }
        }
        let count = (idxs.len() * len) as f64;
        for c in 0..n_ch {
            let mut sum = 0.0;
            for &i in &idxs {
                sum += segments[i].samples.data()[c * len..(c + 1) * len].iter().sum::<f64>();
            }
            let mean = sum / count;
            let mut ss = 0.0;
            for &i in &idxs {
                for &v in &segments[i].samples.data()[c * len..(c + 1) * len] {
                    ss += (v - mean) * (v - mean);
                }
            }
            let std = (ss / count).sqrt();
            if std == 0.0 {
                return Err(DatasetError::ZeroVariance {
                    patient,
                    night,
                    channel: format!("row {c}"),
                });
            }
            for &i in &idxs {
                for v in &mut segments[i].samples.data_mut()[c * len..(c + 1) * len] {
                    *v = (*v - mean) / std;
                }
            }
        }
    }
    Ok(())
}
