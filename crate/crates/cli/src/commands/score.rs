//! `score`: run a trained model over an arbitrary EDF recording.
//!
//! The recording needs no hypnogram; it is cut into consecutive 30 s epochs
//! from the start, each channel is z-scored over the scored span (matching
//! how training data was standardized per recording), and the model labels
//! every epoch. Output: `onset_s,label,confidence` per epoch.

use crate::config::parse_standardize;
use crate::error::{CliError, Result};
use somnoscore::dataset::{
    Approach, StageLabel, StandardizeMode, REQUIRED_RATE_HZ, SEGMENT_SAMPLES, SEGMENT_SECONDS,
};
use somnoscore::edf::{parse_header, read_signal};
use somnoscore::model::load_model;
use somnoscore::nn::Tensor;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub fn run(model_path: &Path, file: &Path, out: &Path, standardize: &str) -> Result<()> {
    let mode = parse_standardize(standardize)?;
    let model = load_model(model_path)?;
    let approach = match model.provenance.approach.as_deref() {
        Some(name) => Approach::from_name(name).ok_or_else(|| {
            CliError::data(format!("model records unknown approach {name:?}"))
        })?,
        // An unprovenanced model is assigned the conventional channels for
        // its width.
        None => match model.spec.n_channels {
            1 => Approach::FpzCz,
            2 => Approach::Dual,
            n => return Err(CliError::data(format!("model expects {n} channels"))),
        },
    };

    let bytes = fs::read(file)?;
    let (header, specs) = parse_header(&bytes)?;
    let mut channels = Vec::new();
    for &label in approach.channel_labels() {
        let spec = specs
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| CliError::data(format!("{} has no {label:?} signal", file.display())))?;
        let rate = spec.sampling_rate(header.record_duration);
        if (rate - REQUIRED_RATE_HZ).abs() > 1e-9 {
            return Err(CliError::data(format!(
                "{label:?} is sampled at {rate} Hz, the model expects {REQUIRED_RATE_HZ} Hz"
            )));
        }
        channels.push(read_signal(&bytes, &header, &specs, label)?);
    }

    let shortest = channels.iter().map(Vec::len).min().expect("at least one channel");
    let n_epochs = shortest / SEGMENT_SAMPLES;
    if n_epochs == 0 {
        return Err(CliError::data(format!(
            "recording holds {shortest} samples, shorter than one {SEGMENT_SECONDS} s epoch"
        )));
    }
    let span = n_epochs * SEGMENT_SAMPLES;
    if mode == StandardizeMode::PerRecordingZscore {
        for channel in &mut channels {
            zscore(&mut channel[..span])?;
        }
    }

    let mut csv = String::from("onset_s,label,confidence\n");
    for epoch in 0..n_epochs {
        let mut data = Vec::with_capacity(channels.len() * SEGMENT_SAMPLES);
        for channel in &channels {
            data.extend_from_slice(&channel[epoch * SEGMENT_SAMPLES..(epoch + 1) * SEGMENT_SAMPLES]);
        }
        let input = Tensor::new(vec![channels.len(), SEGMENT_SAMPLES], data)?;
        let (class, confidence) = model.predict(&input)?;
        let label = StageLabel::from_class_index(class).expect("predictions are class indices");
        let _ = writeln!(csv, "{},{},{confidence}", epoch as f64 * SEGMENT_SECONDS, label.name());
    }
    fs::write(out, csv)?;
    println!("scored {n_epochs} epochs from {} into {}", file.display(), out.display());
    Ok(())
}

/// In-place z-score with the population standard deviation, the same
/// convention the dataset standardizer uses.
fn zscore(samples: &mut [f64]) -> Result<()> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = variance.sqrt();
    if std == 0.0 {
        return Err(CliError::data("a channel is constant over the scored span"));
    }
    for x in samples {
        *x = (*x - mean) / std;
    }
    Ok(())
}
