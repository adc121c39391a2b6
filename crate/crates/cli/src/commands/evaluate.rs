//! `evaluate` and `ensemble`: score per-fold models on held-out patients.
//!
//! Model files are discovered by name, `<approach>_foldNN.model`, the layout
//! `train` writes. Fold NN's test set is the NN-th patient (1-based) in
//! sorted order, the same correspondence the fold planner uses, so held-out
//! evaluation needs only the cache and the models directory.

use crate::commands::report::{aggregate_csv, aggregate_text};
use crate::error::{CliError, Result};
use somnoscore::dataset::{read_cache, Approach, Segment};
use somnoscore::eval::{
    aggregate_by_approach, evaluate_ensemble, evaluate_single, write_fold_results_json,
    write_fold_rows, FoldResult, FoldRow,
};
use somnoscore::model::{load_model, ModelParams};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

pub fn run_single(models_dir: &Path, cache: &Path, out: Option<&Path>) -> Result<()> {
    let (labels, segments, patients) = load_cache(cache)?;
    let out_dir = out.unwrap_or(models_dir);
    fs::create_dir_all(out_dir)?;

    let mut results = Vec::new();
    for approach in Approach::ALL {
        for (fold_id, path) in find_models(models_dir, approach)? {
            let model = load_and_check(&path, fold_id, Some(approach))?;
            let test = test_segments(&segments, &patients, fold_id)?;
            let result = evaluate_single(&model, approach, test, &labels, fold_id)?;
            print_result(&result);
            results.push(result);
        }
    }
    if results.is_empty() {
        return Err(CliError::data(format!(
            "no <approach>_foldNN.model files under {}",
            models_dir.display()
        )));
    }
    write_outputs(out_dir, "fold_results", &results)
}

pub fn run_ensemble(models_dir: &Path, cache: &Path, out: Option<&Path>) -> Result<()> {
    let (labels, segments, patients) = load_cache(cache)?;
    let out_dir = out.unwrap_or(models_dir);
    fs::create_dir_all(out_dir)?;

    let per_approach: Vec<BTreeMap<u32, PathBuf>> =
        Approach::ALL.iter().map(|&a| find_models(models_dir, a)).collect::<Result<_>>()?;
    let common: Vec<u32> = per_approach[0]
        .keys()
        .filter(|fold| per_approach.iter().all(|m| m.contains_key(fold)))
        .copied()
        .collect();
    if common.is_empty() {
        return Err(CliError::data(format!(
            "the ensemble needs all three approaches' models for at least one fold \
             under {}",
            models_dir.display()
        )));
    }

    let mut results = Vec::new();
    for fold_id in common {
        let mut members: Vec<(ModelParams, Approach)> = Vec::new();
        for (approach, found) in Approach::ALL.into_iter().zip(&per_approach) {
            let model = load_and_check(&found[&fold_id], fold_id, Some(approach))?;
            members.push((model, approach));
        }
        let borrowed: Vec<(&ModelParams, Approach)> =
            members.iter().map(|(m, a)| (m, *a)).collect();
        let test = test_segments(&segments, &patients, fold_id)?;
        let result = evaluate_ensemble(&borrowed, test, &labels, fold_id)?;
        print_result(&result);
        results.push(result);
    }
    write_outputs(out_dir, "ensemble_results", &results)
}

/// Cache plus the sorted patient list that defines fold numbering.
fn load_cache(cache: &Path) -> Result<(Vec<String>, Vec<Segment>, Vec<u32>)> {
    let (labels, mut segments) = read_cache(cache)?;
    segments.sort_by_key(|s| (s.patient_id, s.night, s.index));
    let patients: Vec<u32> =
        segments.iter().map(|s| s.patient_id).collect::<BTreeSet<_>>().into_iter().collect();
    Ok((labels, segments, patients))
}

/// `<approach>_foldNN.model` files in a directory, keyed by fold id.
fn find_models(dir: &Path, approach: Approach) -> Result<BTreeMap<u32, PathBuf>> {
    let prefix = format!("{}_fold", approach.name());
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", dir.display())))?;
    for entry in entries {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let fold = name
            .strip_prefix(&prefix)
            .and_then(|rest| rest.strip_suffix(".model"))
            .and_then(|digits| digits.parse::<u32>().ok());
        if let Some(fold) = fold {
            out.insert(fold, entry.path());
        }
    }
    Ok(out)
}

/// Loads a model and cross-checks its recorded provenance against the file
/// name, so a renamed artifact cannot be scored against the wrong patient.
fn load_and_check(path: &Path, fold_id: u32, approach: Option<Approach>) -> Result<ModelParams> {
    let model = load_model(path)?;
    if let Some(recorded) = model.provenance.fold_id {
        if recorded != fold_id {
            return Err(CliError::data(format!(
                "{} is named fold {fold_id} but records fold {recorded}",
                path.display()
            )));
        }
    }
    if let (Some(expected), Some(recorded)) = (approach, model.provenance.approach.as_deref()) {
        if recorded != expected.name() {
            return Err(CliError::data(format!(
                "{} is named {} but records approach {recorded:?}",
                path.display(),
                expected.name()
            )));
        }
    }
    Ok(model)
}

/// Fold NN's test set: every segment of the NN-th patient in sorted order.
fn test_segments<'a>(
    segments: &'a [Segment],
    patients: &[u32],
    fold_id: u32,
) -> Result<&'a [Segment]> {
    let patient = *patients.get(fold_id as usize - 1).ok_or_else(|| {
        CliError::data(format!(
            "fold {fold_id} has no patient: the cache holds {} patients",
            patients.len()
        ))
    })?;
    let start = segments.partition_point(|s| s.patient_id < patient);
    let end = segments.partition_point(|s| s.patient_id <= patient);
    Ok(&segments[start..end])
}

fn print_result(result: &FoldResult) {
    println!(
        "{:<8} fold {:02}: accuracy {:.4}, kappa {:.4}, f1_macro {:.4}, coverage {:.4}",
        result.approach, result.fold_id, result.accuracy, result.kappa, result.f1_macro,
        result.coverage
    );
}

/// Writes the row CSV, the JSON sidecar with confusion matrices, and the
/// aggregate CSV; prints the aggregate table.
fn write_outputs(out_dir: &Path, stem: &str, results: &[FoldResult]) -> Result<()> {
    let rows: Vec<FoldRow> = results
        .iter()
        .map(|r| FoldRow {
            fold_id: r.fold_id,
            approach: r.approach.clone(),
            accuracy: r.accuracy,
            kappa: r.kappa,
            f1_macro: r.f1_macro,
            coverage: r.coverage,
        })
        .collect();
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let json_path = out_dir.join(format!("{stem}.json"));
    let aggregate_path = out_dir.join(format!("{stem}_aggregate.csv"));
    write_fold_rows(&csv_path, &rows)?;
    write_fold_results_json(&json_path, results)?;

    let summaries = aggregate_by_approach(&rows)?;
    print!("{}", aggregate_text(&summaries));
    fs::write(&aggregate_path, aggregate_csv(&summaries))?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());
    println!("wrote {}", aggregate_path.display());
    Ok(())
}
