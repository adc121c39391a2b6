//! `report` and `stats`: summaries and pairwise comparisons of fold results.
//!
//! Both read either one results CSV or a directory, where every `.csv` file
//! whose header matches the per-fold schema contributes rows. That lets the
//! outputs of `evaluate` and `ensemble` sit side by side and be analyzed
//! together.

use crate::error::{CliError, Result};
use somnoscore::eval::{
    aggregate_by_approach, read_fold_rows, FoldRow, MetricSummary, FOLD_ROW_HEADER,
    SUMMARY_METRICS,
};
use somnoscore::stats::{compare_approaches, write_comparisons, Comparison};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub fn run_report(results: &Path, out: Option<&Path>) -> Result<()> {
    let rows = collect_rows(results)?;
    let summaries = aggregate_by_approach(&rows)?;
    print!("{}", aggregate_text(&summaries));
    if let Some(path) = out {
        fs::write(path, aggregate_csv(&summaries))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn run_stats(results: &Path, alpha: f64, metrics: &str, out: Option<&Path>) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::usage(format!("alpha {alpha} must lie in (0, 1)")));
    }
    let metrics: Vec<&str> =
        metrics.split(',').map(str::trim).filter(|m| !m.is_empty()).collect();
    if metrics.is_empty() {
        return Err(CliError::usage("no metrics requested"));
    }
    let rows = collect_rows(results)?;
    let comparisons = compare_approaches(&rows, &metrics, alpha)?;
    print!("{}", comparison_text(&comparisons, alpha));
    if let Some(path) = out {
        write_comparisons(path, &comparisons)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Reads fold rows from a CSV file, or from every matching CSV directly
/// inside a directory.
fn collect_rows(results: &Path) -> Result<Vec<FoldRow>> {
    if results.is_file() {
        return Ok(read_fold_rows(results)?);
    }
    if !results.is_dir() {
        return Err(CliError::usage(format!(
            "{} is neither a file nor a directory",
            results.display()
        )));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(results)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|path| path.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    paths.sort();

    let mut rows = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path)?;
        let header = text
            .lines()
            .map(str::trim)
            .find(|line| !line.is_empty() && !line.starts_with('#'));
        if header == Some(FOLD_ROW_HEADER) {
            rows.extend(read_fold_rows(&path)?);
        }
    }
    if rows.is_empty() {
        return Err(CliError::data(format!(
            "no per-fold result rows found under {}",
            results.display()
        )));
    }
    Ok(rows)
}

/// Table-style aggregate: one row per approach, `mean (std)` per metric.
pub fn aggregate_text(summaries: &BTreeMap<String, [MetricSummary; 4]>) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<10} {:>5}", "approach", "folds");
    for metric in SUMMARY_METRICS {
        let _ = write!(out, " {metric:>18}");
    }
    out.push('\n');
    for (approach, metrics) in summaries {
        let _ = write!(out, "{approach:<10} {:>5}", metrics[0].n);
        for summary in metrics {
            let cell = match summary.std {
                Some(std) => format!("{:.4} ({:.4})", summary.mean, std),
                None => format!("{:.4}", summary.mean),
            };
            let _ = write!(out, " {cell:>18}");
        }
        out.push('\n');
    }
    out
}

/// The same aggregate as machine-readable CSV.
pub fn aggregate_csv(summaries: &BTreeMap<String, [MetricSummary; 4]>) -> String {
    let mut out = String::from("approach,metric,n,mean,std\n");
    for (approach, metrics) in summaries {
        for (metric, summary) in SUMMARY_METRICS.iter().zip(metrics) {
            let std = summary.std.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{approach},{metric},{},{},{std}", summary.n, summary.mean);
        }
    }
    out
}

fn comparison_text(comparisons: &[Comparison], alpha: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<10} {:<10} {:>10} {:>10} {:>12} {:<10} significant (alpha {alpha})",
        "a", "b", "metric", "ks_p_a", "ks_p_b", "wilcoxon_p", "method"
    );
    for c in comparisons {
        let _ = writeln!(
            out,
            "{:<10} {:<10} {:<10} {:>10.4} {:>10.4} {:>12.6} {:<10} {}",
            c.approach_a,
            c.approach_b,
            c.metric,
            c.ks_p_a,
            c.ks_p_b,
            c.wilcoxon_p,
            c.method,
            if c.significant { "yes" } else { "no" }
        );
    }
    out
}
