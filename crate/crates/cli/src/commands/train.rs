//! `train`: run one fold or the whole leave-one-patient-out campaign.

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use sha2::{Digest, Sha256};
use somnoscore::dataset::{
    decode_cache, leave_one_out_folds, prepare_dataset, FoldPlan, Segment, STUDY_PATIENTS,
};
use somnoscore::training::run_loocv;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub fn run(config_path: &Path, fold: Option<u32>, force_flag: bool) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let force = force_flag || config.force;
    let (labels, segments, data_sha256) = load_segments(&config)?;

    let patients: BTreeSet<u32> = segments.iter().map(|s| s.patient_id).collect();
    if patients.len() != STUDY_PATIENTS {
        println!(
            "note: corpus has {} patients (the study protocol uses {STUDY_PATIENTS})",
            patients.len()
        );
    }
    let mut folds = leave_one_out_folds(&segments, config.seed, config.validation_fraction)?;
    if let Some(wanted) = fold {
        let total = folds.len();
        folds.retain(|f| f.fold_id == wanted);
        if folds.is_empty() {
            return Err(CliError::usage(format!("--fold {wanted} is outside 1..={total}")));
        }
    }

    if config.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| CliError::usage(format!("cannot build worker pool: {e}")))?;
        pool.install(|| campaign(&config, &labels, &segments, &folds, force, &data_sha256))
    } else {
        campaign(&config, &labels, &segments, &folds, force, &data_sha256)
    }
}

fn campaign(
    config: &RunConfig,
    labels: &[String],
    segments: &[Segment],
    folds: &[FoldPlan],
    force: bool,
    data_sha256: &Option<String>,
) -> Result<()> {
    for &approach in &config.approaches {
        let train_config = config.train_config(approach);
        let artifacts = run_loocv(
            segments,
            labels,
            folds,
            &train_config,
            &config.output_dir,
            force,
            data_sha256.clone(),
        )?;
        for artifact in artifacts {
            let status = if artifact.skipped { "kept existing" } else { "wrote" };
            println!(
                "{:<8} fold {:02}: {status} {}",
                approach.name(),
                artifact.fold_id,
                artifact.model_path.display()
            );
        }
    }
    Ok(())
}

/// Loads segments from the cache (hashing it for the manifest) or, when only
/// `data_dir` is configured, segments the raw corpus directly.
fn load_segments(config: &RunConfig) -> Result<(Vec<String>, Vec<Segment>, Option<String>)> {
    if let Some(cache) = &config.cache {
        let bytes = fs::read(cache)
            .map_err(|e| CliError::data(format!("cannot read cache {}: {e}", cache.display())))?;
        let digest = Sha256::digest(&bytes);
        let mut sha = String::with_capacity(64);
        for byte in digest {
            let _ = write!(sha, "{byte:02x}");
        }
        let (labels, segments) = decode_cache(&bytes)?;
        Ok((labels, segments, Some(sha)))
    } else {
        let data_dir = config.data_dir.as_ref().expect("RunConfig requires cache or data_dir");
        let (labels, segments, _) = prepare_dataset(data_dir, config.standardize)?;
        Ok((labels, segments, None))
    }
}
