//! `inspect`: print what an EDF file declares and contains.

use crate::error::Result;
use somnoscore::edf::{effective_record_count, parse_annotations, parse_header};
use std::fs;
use std::path::Path;

pub fn run(file: &Path) -> Result<()> {
    let bytes = fs::read(file)?;
    let (header, specs) = parse_header(&bytes)?;
    let records = effective_record_count(&header, &specs, bytes.len())?;

    println!("file:            {}", file.display());
    println!("version:         {}", header.version);
    println!("patient:         {}", header.patient_info);
    println!("recording:       {}", header.recording_info);
    println!("start:           {}", header.start_datetime);
    if !header.reserved.is_empty() {
        println!("reserved:        {}", header.reserved);
    }
    println!("record duration: {} s", header.record_duration);
    if header.n_data_records >= 0 {
        println!("records:         {} declared, {records} readable", header.n_data_records);
    } else {
        println!("records:         unknown count declared, {records} readable");
    }
    println!("signals:         {}", header.n_signals);
    for (i, spec) in specs.iter().enumerate() {
        if spec.is_annotation() {
            println!(
                "  [{i}] {:<16} annotations, {} bytes/record",
                spec.label,
                spec.samples_per_record * 2
            );
        } else {
            println!(
                "  [{i}] {:<16} {} Hz, {} samples/record, {} [{}, {}], digital [{}, {}]",
                spec.label,
                spec.sampling_rate(header.record_duration),
                spec.samples_per_record,
                spec.physical_dimension,
                spec.physical_min,
                spec.physical_max,
                spec.digital_min,
                spec.digital_max,
            );
        }
    }

    let events = parse_annotations(&bytes, &header, &specs)?;
    if events.is_empty() {
        println!("annotations:     none");
    } else {
        println!(
            "annotations:     {} events, onsets {} s to {} s",
            events.len(),
            events.first().unwrap().onset_seconds,
            events.last().unwrap().onset_seconds
        );
        for event in events.iter().take(5) {
            println!(
                "  {:>8} s  +{} s  {:?}",
                event.onset_seconds, event.duration_seconds, event.text
            );
        }
        if events.len() > 5 {
            println!("  ... {} more", events.len() - 5);
        }
    }
    Ok(())
}
