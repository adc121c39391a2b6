//! `prepare`: corpus directory to standardized, labeled segment cache.

use crate::config::parse_standardize;
use crate::error::{CliError, Result};
use somnoscore::dataset::{prepare_dataset, write_cache, StageLabel};
use std::fs;
use std::path::Path;

pub fn run(data_dir: &Path, out: &Path, standardize: &str) -> Result<()> {
    let mode = parse_standardize(standardize)?;
    if !data_dir.is_dir() {
        return Err(CliError::usage(format!("{} is not a directory", data_dir.display())));
    }
    let (labels, segments, summary) = prepare_dataset(data_dir, mode)?;
    write_cache(out, &labels, &segments)?;

    println!("patients:          {}", summary.patients);
    println!("recordings:        {}", summary.recordings);
    println!("usable segments:   {}", segments.len());
    for (label, count) in StageLabel::TRAINABLE.iter().zip(summary.class_counts) {
        println!("  {:<9} {count}", label.name());
    }
    println!("excluded segments: {}", summary.excluded);
    println!("dropped windows:   {}", summary.dropped_windows);
    println!("skipped medicated: {}", summary.skipped_medicated);
    println!("ignored files:     {}", summary.ignored);
    println!("cache:             {} ({} bytes)", out.display(), fs::metadata(out)?.len());
    Ok(())
}
