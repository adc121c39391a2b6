//! Corpus discovery: filename conventions, file pairing, and loading.
//!
//! The cassette corpus names its files `SC4ssNE0-PSG.edf` (signals) and
//! `SC4ssNEC-Hypnogram.edf` (scoring), where `ss` is the two-digit patient
//! number and `N` the night; a PSG file and its hypnogram share their first
//! six stem characters. Telemetry files (`ST*`, recorded under medication)
//! are out of scope and only counted. Scoring may live in the PSG file
//! itself, in the companion, or both; the loader takes the union.

use super::{
    segment_recording, standardize, DatasetError, Result, Segment, StandardizeMode, FPZ_CZ,
    PZ_OZ,
};
use crate::edf::{parse_annotations, parse_header, read_signal, Channel, Recording};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

const PSG_SUFFIX: &str = "-PSG.edf";
const HYPNOGRAM_SUFFIX: &str = "-Hypnogram.edf";

/// The files behind one recording (one patient-night).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordingFiles {
    pub patient_id: u32,
    pub night: u32,
    pub psg: PathBuf,
    pub hypnogram: Option<PathBuf>,
}

/// Result of [`scan_corpus`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusScan {
    /// Recognized recordings, sorted by (patient, night).
    pub recordings: Vec<RecordingFiles>,
    /// Telemetry (`ST*`) files skipped by design.
    pub skipped_medicated: usize,
    /// File names that matched no convention (including hypnograms without
    /// a PSG file).
    pub ignored: Vec<String>,
}

/// Scans a directory for cassette recordings.
///
/// Only file names are inspected, never contents. Subdirectories are
/// skipped. Two files claiming the same patient-night are an error.
pub fn scan_corpus(dir: &Path) -> Result<CorpusScan> {
    let mut names: Vec<String> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            continue;
        }
        if let Some(name) = entry.file_name().to_str() {
            names.push(name.to_string());
        }
    }
    names.sort_unstable();

    let mut psgs: BTreeMap<String, String> = BTreeMap::new();
    let mut hyps: BTreeMap<String, String> = BTreeMap::new();
    let mut skipped_medicated = 0usize;
    let mut ignored = Vec::new();
    for name in names {
        if name.starts_with("ST") && name.ends_with(".edf") {
            skipped_medicated += 1;
            continue;
        }
        let classified = if let Some(stem) = name.strip_suffix(PSG_SUFFIX) {
            cassette_key(stem).map(|key| (&mut psgs, key))
        } else if let Some(stem) = name.strip_suffix(HYPNOGRAM_SUFFIX) {
            cassette_key(stem).map(|key| (&mut hyps, key))
        } else {
            None
        };
        match classified {
            Some((map, key)) => {
                if let Some(previous) = map.insert(key.clone(), name.clone()) {
                    return Err(DatasetError::Inconsistent(format!(
                        "{previous} and {name} both claim recording {key}"
                    )));
                }
            }
            None => ignored.push(name),
        }
    }

    let mut recordings = Vec::with_capacity(psgs.len());
    for (key, psg_name) in psgs {
        let (patient_id, night) = parse_key(&key);
        recordings.push(RecordingFiles {
            patient_id,
            night,
            psg: dir.join(psg_name),
            hypnogram: hyps.remove(&key).map(|h| dir.join(h)),
        });
    }
    // Hypnograms with no PSG carry no usable signal.
    ignored.extend(hyps.into_values());
    ignored.sort_unstable();
    recordings.sort_by_key(|r| (r.patient_id, r.night));
    Ok(CorpusScan { recordings, skipped_medicated, ignored })
}

/// First six stem characters (`SC4` + patient + night), if they follow the
/// cassette convention.
fn cassette_key(stem: &str) -> Option<String> {
    let key = stem.get(..6)?;
    if !key.starts_with("SC4") {
        return None;
    }
    if !key[3..].bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some(key.to_string())
}

fn parse_key(key: &str) -> (u32, u32) {
    let patient = key[3..5].parse().expect("validated by cassette_key");
    let night = key[5..6].parse().expect("validated by cassette_key");
    (patient, night)
}

/// Loads both EEG derivations and the union of all scored events for one
/// recording. Errors if either channel is missing or no events exist in
/// either file.
pub fn load_recording(files: &RecordingFiles) -> Result<Recording> {
    let psg_bytes = fs::read(&files.psg)?;
    let (header, specs) = parse_header(&psg_bytes)?;

    let mut channels = Vec::with_capacity(2);
    for label in [FPZ_CZ, PZ_OZ] {
        let spec = specs.iter().find(|s| s.label == label).ok_or_else(|| {
            DatasetError::MissingChannel {
                label: label.to_string(),
                patient: files.patient_id,
                night: files.night,
            }
        })?;
        channels.push(Channel {
            label: label.to_string(),
            samples: read_signal(&psg_bytes, &header, &specs, label)?,
            sampling_rate: spec.sampling_rate(header.record_duration),
        });
    }

    let mut events = parse_annotations(&psg_bytes, &header, &specs)?;
    if let Some(hyp_path) = &files.hypnogram {
        let hyp_bytes = fs::read(hyp_path)?;
        let (hyp_header, hyp_specs) = parse_header(&hyp_bytes)?;
        events.extend(parse_annotations(&hyp_bytes, &hyp_header, &hyp_specs)?);
    }
    if events.is_empty() {
        return Err(DatasetError::NoHypnogram {
            patient: files.patient_id,
            night: files.night,
        });
    }
    events.sort_by(|a, b| {
        a.onset_seconds
            .total_cmp(&b.onset_seconds)
            .then(a.duration_seconds.total_cmp(&b.duration_seconds))
            .then(a.text.cmp(&b.text))
    });

    Ok(Recording {
        patient_id: files.patient_id,
        night: files.night,
        channels,
        events,
    })
}

/// Counts reported by [`prepare_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PrepareSummary {
    pub patients: usize,
    pub recordings: usize,
    /// Usable 30 s windows per stage, class-index order W, N1, N2, N3, REM.
    pub class_counts: [u64; 5],
    /// Movement-time and unscored windows, never part of the output.
    pub excluded: u64,
    /// Windows lost to sub-30 s remainders or signal that ran out.
    pub dropped_windows: u64,
    pub skipped_medicated: usize,
    pub ignored: usize,
}

/// Scans, loads, cuts, and (optionally) standardizes a whole corpus.
///
/// Returns the stored channel labels, the usable segments (both EEG
/// channels, `Excluded` filtered out), and counting. Standardization
/// statistics are computed over each recording's usable segments only, so
/// movement-time artifacts cannot skew the scaling.
pub fn prepare_dataset(
    dir: &Path,
    mode: StandardizeMode,
) -> Result<(Vec<String>, Vec<Segment>, PrepareSummary)> {
    let scan = scan_corpus(dir)?;
    let mut summary = PrepareSummary {
        recordings: scan.recordings.len(),
        skipped_medicated: scan.skipped_medicated,
        ignored: scan.ignored.len(),
        ..PrepareSummary::default()
    };
    summary.patients =
        scan.recordings.iter().map(|r| r.patient_id).collect::<BTreeSet<_>>().len();

    let mut usable = Vec::new();
    for files in &scan.recordings {
        let recording = load_recording(files)?;
        let cut = segment_recording(&recording, &[FPZ_CZ, PZ_OZ])?;
        summary.dropped_windows += cut.dropped_windows as u64;
        for segment in cut.segments {
            match segment.label.class_index() {
                Some(class) => {
                    summary.class_counts[class] += 1;
                    usable.push(segment);
                }
                None => summary.excluded += 1,
            }
        }
    }
    standardize(&mut usable, mode)?;
    let labels = vec![FPZ_CZ.to_string(), PZ_OZ.to_string()];
    Ok((labels, usable, summary))
}
