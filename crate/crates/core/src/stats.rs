//! Statistics: error function, normal CDF, Kolmogorov-Smirnov normality
//! check, Wilcoxon signed-rank test, and pairwise approach comparison.
//!
//! Everything is computed from scratch in f64. The Wilcoxon test is exact
//! (full enumeration of sign patterns) up to 25 non-zero differences and
//! falls back to the tie-corrected, continuity-corrected normal
//! approximation above that; both values are always reported when
//! available so the choice stays auditable.

use crate::eval::FoldRow;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty sample")]
    Empty,
    #[error("needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("paired samples differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("all paired differences are zero; the samples are identical")]
    AllZeroDifferences,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("unknown metric {0:?} (expected accuracy, kappa, f1_macro, or coverage)")]
    UnknownMetric(String),
    #[error("fold sets differ across approaches: {0}")]
    FoldMisalignment(String),
    #[error("duplicate row for approach {approach:?} fold {fold_id}")]
    DuplicateRow { approach: String, fold_id: u32 },
    #[error("comparison csv line {line}: {message}")]
    CsvFormat { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Significance level used throughout unless overridden.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Largest number of non-zero differences for which the Wilcoxon null
/// distribution is enumerated exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (the n-1 denominator), the convention used by
/// every summary this crate prints.
pub fn sample_std(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: values.len() });
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Ok((ss / (values.len() - 1) as f64).sqrt())
}

/// Error function, accurate to about 1e-15 over the real line.
///
/// Uses the Maclaurin series for |x| < 2 and a continued fraction for the
/// complement above, evaluated with the modified Lentz algorithm.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.abs() < 2.0 {
        erf_series(x)
    } else if x > 0.0 {
        1.0 - erfc_continued_fraction(x)
    } else {
        erfc_continued_fraction(-x) - 1.0
    }
}

fn erf_series(x: f64) -> f64 {
    // 2/sqrt(pi) * sum_k (-1)^k x^(2k+1) / (k! (2k+1))
    let x2 = x * x;
    let mut power = x; // (-1)^k x^(2k+1) / k!
    let mut sum = x;
    for k in 1..200 {
        power *= -x2 / k as f64;
        let term = power / (2 * k + 1) as f64;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 + 1e-300 {
            break;
        }
    }
    sum * 2.0 / PI.sqrt()
}

fn erfc_continued_fraction(x: f64) -> f64 {
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    debug_assert!(x >= 2.0);
    let tiny = 1e-300;
    let mut f = tiny;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..200 {
        let a = if j == 1 { 1.0 } else { (j - 1) as f64 / 2.0 };
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x * x).exp() / PI.sqrt() * f
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / SQRT_2))
}

/// Survival function of the Kolmogorov distribution,
/// `Q(t) = 2 sum_k (-1)^(k-1) exp(-2 k^2 t^2)`, with the theta-function
/// form below t = 1 where the alternating series converges slowly.
pub fn kolmogorov_q(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t <= 0.0 {
        return 1.0;
    }
    if t < 1.0 {
        let mut s = 0.0;
        for k in 1..64u32 {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * PI * PI / (8.0 * t * t)).exp();
            s += term;
            if term < 1e-300 {
                break;
            }
        }
        (1.0 - (2.0 * PI).sqrt() / t * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        let mut sign = 1.0;
        for k in 1..200u32 {
            let term = (-2.0 * (k * k) as f64 * t * t).exp();
            s += sign * term;
            sign = -sign;
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Result of the normality check.
#[derive(Debug, Clone, PartialEq)]
pub struct KsResult {
    /// Largest gap between the empirical CDF and the fitted normal CDF.
    pub statistic: f64,
    /// Asymptotic Kolmogorov p-value of `sqrt(n) * D`.
    pub p_value: f64,
    pub n: usize,
}

/// Kolmogorov-Smirnov check of normality with estimated parameters.
///
/// Fits the mean and the sample (n-1) standard deviation, takes the largest
/// one-sided ECDF gap in either direction, and converts it through the
/// asymptotic Kolmogorov distribution. Estimating the parameters from the
/// same data makes the asymptotic p-value conservative-leaning rather than
/// exact; it is used here as a screen for whether a paired rank test is the
/// safer comparison.
pub fn ks_normality(sample: &[f64]) -> Result<KsResult> {
    let n = sample.len();
    if n < 3 {
        return Err(StatsError::TooFewSamples { needed: 3, got: n });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite("sample".into()));
    }
    let m = mean(sample)?;
    let sd = sample_std(sample)?;
    if sd == 0.0 {
        return Err(StatsError::DegenerateSample("all values are equal".into()));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = phi((x - m) / sd);
        let upper = (i + 1) as f64 / n as f64 - f;
        let lower = f - i as f64 / n as f64;
        d = d.max(upper).max(lower);
    }
    Ok(KsResult { statistic: d, p_value: kolmogorov_q((n as f64).sqrt() * d), n })
}

/// Result of the paired signed-rank test.
#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// min(W+, W-), the reported test statistic.
    pub w_statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Pairs remaining after zero differences are discarded.
    pub n_effective: usize,
    /// Exact two-sided p by full enumeration; `None` above
    /// [`WILCOXON_EXACT_MAX_N`] effective pairs.
    pub p_exact: Option<f64>,
    /// Normal approximation with tie correction and 0.5 continuity
    /// correction.
    pub p_asymptotic: f64,
    pub method: &'static str,
}

impl WilcoxonResult {
    /// The preferred p-value: exact when available.
    pub fn p_value(&self) -> f64 {
        self.p_exact.unwrap_or(self.p_asymptotic)
    }
}

/// Two-sided Wilcoxon signed-rank test for paired samples.
///
/// Zero differences are discarded; tied absolute differences share their
/// midrank. With `n <= 25` effective pairs the p-value is exact: all `2^n`
/// sign assignments are enumerated (in Gray-code order so each step updates
/// one rank) over doubled ranks, which are integers even with midranks.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch { a: a.len(), b: b.len() });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite("paired samples".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Err(StatsError::AllZeroDifferences);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let w_minus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d < 0.0).map(|(r, _)| r).sum();
    let w = w_plus.min(w_minus);

    // Tie-corrected variance: sum (t^3 - t) over groups of equal |d|.
    let mut sorted_abs = abs.clone();
    sorted_abs.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted_abs.len() {
        let mut j = i;
        while j + 1 < sorted_abs.len() && sorted_abs[j + 1] == sorted_abs[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let sigma = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0).sqrt();
    let z = (w - mu + 0.5) / sigma;
    let p_asymptotic = (2.0 * phi(z)).clamp(0.0, 1.0);

    let p_exact = if n <= WILCOXON_EXACT_MAX_N {
        let ranks2: Vec<u64> = ranks.iter().map(|r| (2.0 * r).round() as u64).collect();
        Some(exact_two_sided_p(&ranks2, (2.0 * w).round() as u64))
    } else {
        None
    };
    Ok(WilcoxonResult {
        w_statistic: w,
        w_plus,
        w_minus,
        n_effective: n,
        p_exact,
        p_asymptotic,
        method: if p_exact.is_some() { "exact" } else { "asymptotic" },
    })
}

/// Average ranks (1-based) with ties sharing their midrank.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// P(W+ <= w) summed over all sign patterns, doubled (the null distribution
/// of W+ is symmetric, so this is the two-sided p), clamped to 1.
fn exact_two_sided_p(ranks2: &[u64], w2: u64) -> f64 {
    let n = ranks2.len();
    let mut count: u64 = 1; // the all-negative pattern has W+ = 0 <= w2
    let mut current: u64 = 0;
    let mut prev_gray: u64 = 0;
    for i in 1..(1u64 << n) {
        let gray = i ^ (i >> 1);
        let changed = (gray ^ prev_gray).trailing_zeros() as usize;
        if gray & (1 << changed) != 0 {
            current += ranks2[changed];
        } else {
            current -= ranks2[changed];
        }
        prev_gray = gray;
        if current <= w2 {
            count += 1;
        }
    }
    (2.0 * count as f64 / (1u64 << n) as f64).min(1.0)
}

/// One pairwise comparison of two approaches on one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub approach_a: String,
    pub approach_b: String,
    pub metric: String,
    /// Normality p-value for each side's fold values.
    pub ks_p_a: f64,
    pub ks_p_b: f64,
    /// Preferred Wilcoxon p (exact when available).
    pub wilcoxon_p: f64,
    /// "exact", "asymptotic", or "identical" (all differences zero).
    pub method: String,
    pub significant: bool,
}

fn metric_accessor(metric: &str) -> Result<fn(&FoldRow) -> f64> {
    match metric {
        "accuracy" => Ok(|r| r.accuracy),
        "kappa" => Ok(|r| r.kappa),
        "f1_macro" => Ok(|r| r.f1_macro),
        "coverage" => Ok(|r| r.coverage),
        other => Err(StatsError::UnknownMetric(other.to_string())),
    }
}

/// Compares every pair of approaches on each metric with the paired
/// signed-rank test, pairing fold by fold.
///
/// All approaches must cover the same fold set. Pairs iterate in sorted
/// name order. Two identical columns get `method = "identical"` and p = 1
/// instead of an error. A zero-variance column still fails the normality
/// screen; the error names the metric and approach.
pub fn compare_approaches(
    rows: &[FoldRow],
    metrics: &[&str],
    alpha: f64,
) -> Result<Vec<Comparison>> {
    let accessors: Vec<(&str, fn(&FoldRow) -> f64)> = metrics
        .iter()
        .map(|&m| metric_accessor(m).map(|f| (m, f)))
        .collect::<Result<_>>()?;
    let mut by_approach: BTreeMap<&str, BTreeMap<u32, &FoldRow>> = BTreeMap::new();
    for row in rows {
        if let Some(previous) = by_approach
            .entry(row.approach.as_str())
            .or_default()
            .insert(row.fold_id, row)
        {
            return Err(StatsError::DuplicateRow {
                approach: previous.approach.clone(),
                fold_id: row.fold_id,
            });
        }
    }
    let fold_sets: Vec<(&str, BTreeSet<u32>)> = by_approach
        .iter()
        .map(|(name, folds)| (*name, folds.keys().copied().collect()))
        .collect();
    for pair in fold_sets.windows(2) {
        if pair[0].1 != pair[1].1 {
            return Err(StatsError::FoldMisalignment(format!(
                "{} covers {} folds, {} covers {}",
                pair[0].0,
                pair[0].1.len(),
                pair[1].0,
                pair[1].1.len()
            )));
        }
    }

    let names: Vec<&str> = by_approach.keys().copied().collect();
    let mut out = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            for &(metric, accessor) in &accessors {
                let column = |name: &str| -> Vec<f64> {
                    by_approach[name].values().map(|row| accessor(row)).collect()
                };
                let va = column(names[i]);
                let vb = column(names[j]);
                let screen = |name: &str, values: &[f64]| {
                    ks_normality(values).map_err(|e| match e {
                        StatsError::DegenerateSample(msg) => StatsError::DegenerateSample(
                            format!("{metric} of {name}: {msg}"),
                        ),
                        other => other,
                    })
                };
                let ks_p_a = screen(names[i], &va)?.p_value;
                let ks_p_b = screen(names[j], &vb)?.p_value;
                let (wilcoxon_p, method) = match wilcoxon_signed_rank(&va, &vb) {
                    Ok(w) => (w.p_value(), w.method.to_string()),
                    Err(StatsError::AllZeroDifferences) => (1.0, "identical".to_string()),
                    Err(e) => return Err(e),
                };
                out.push(Comparison {
                    approach_a: names[i].to_string(),
                    approach_b: names[j].to_string(),
                    metric: metric.to_string(),
                    ks_p_a,
                    ks_p_b,
                    wilcoxon_p,
                    significant: wilcoxon_p < alpha && method != "identical",
                    method,
                });
            }
        }
    }
    Ok(out)
}

const COMPARISON_HEADER: &str =
    "approach_a,approach_b,metric,ks_p_a,ks_p_b,wilcoxon_p,method,significant";

/// Renders comparisons as CSV with lossless f64 formatting.
pub fn comparisons_to_csv(comparisons: &[Comparison]) -> Result<String> {
    let mut out = String::new();
    out.push_str(COMPARISON_HEADER);
    out.push('\n');
    for c in comparisons {
        for field in [&c.approach_a, &c.approach_b, &c.metric, &c.method] {
            if field.contains(',') || field.contains('\n') {
                return Err(StatsError::CsvFormat {
                    line: 0,
                    message: format!("field {field:?} cannot be written to csv"),
                });
            }
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.approach_a, c.approach_b, c.metric, c.ks_p_a, c.ks_p_b, c.wilcoxon_p, c.method,
            c.significant
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// Parses comparison CSV; `#` comments and blank lines are skipped.
pub fn comparisons_from_csv(text: &str) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    let mut saw_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != COMPARISON_HEADER {
                return Err(StatsError::CsvFormat {
                    line: i + 1,
                    message: format!("expected header {COMPARISON_HEADER:?}, found {line:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(StatsError::CsvFormat {
                line: i + 1,
                message: format!("expected 8 fields, found {}", fields.len()),
            });
        }
        let parse_f64 = |field: &str, name: &str| -> Result<f64> {
            field.parse().map_err(|_| StatsError::CsvFormat {
                line: i + 1,
                message: format!("{name} {field:?} is not a number"),
            })
        };
        out.push(Comparison {
            approach_a: fields[0].to_string(),
            approach_b: fields[1].to_string(),
            metric: fields[2].to_string(),
            ks_p_a: parse_f64(fields[3], "ks_p_a")?,
            ks_p_b: parse_f64(fields[4], "ks_p_b")?,
            wilcoxon_p: parse_f64(fields[5], "wilcoxon_p")?,
            method: fields[6].to_string(),
            significant: match fields[7] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(StatsError::CsvFormat {
                        line: i + 1,
                        message: format!("significant {other:?} is not true/false"),
                    })
                }
            },
        });
    }
    if !saw_header {
        return Err(StatsError::CsvFormat { line: 0, message: "no header line found".into() });
    }
    Ok(out)
}

pub fn write_comparisons(path: &Path, comparisons: &[Comparison]) -> Result<()> {
    fs::write(path, comparisons_to_csv(comparisons)?)?;
    Ok(())
}

pub fn read_comparisons(path: &Path) -> Result<Vec<Comparison>> {
    comparisons_from_csv(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Per-fold test accuracies of the four published approach columns,
    /// used as realistic inputs with independently computed expectations.
    const ACC_FPZ: [f64; 20] = [
        0.9522, 0.9269, 0.9238, 0.9515, 0.8943, 0.9444, 0.9575, 0.9450, 0.9063, 0.9011, 0.9265,
        0.8805, 0.9033, 0.9460, 0.9595, 0.9436, 0.9030, 0.8383, 0.9033, 0.8873,
    ];
    const ACC_PZOZ: [f64; 20] = [
        0.9401, 0.9257, 0.8965, 0.9389, 0.8650, 0.9424, 0.9037, 0.9176, 0.9190, 0.9053, 0.9116,
        0.9205, 0.8891, 0.9111, 0.9602, 0.9028, 0.9142, 0.6630, 0.9098, 0.8964,
    ];
    const ACC_DUAL: [f64; 20] = [
        0.9538, 0.9501, 0.9270, 0.9379, 0.8934, 0.9495, 0.9453, 0.9462, 0.9112, 0.9184, 0.9338,
        0.8677, 0.9137, 0.9470, 0.9636, 0.9408, 0.9168, 0.8832, 0.9216, 0.9124,
    ];
    const ACC_ENS: [f64; 20] = [
        0.9544, 0.9419, 0.9249, 0.9490, 0.8882, 0.9488, 0.9473, 0.9430, 0.9214, 0.9150, 0.9338,
        0.8818, 0.9167, 0.9396, 0.9647, 0.9397, 0.9190, 0.8824, 0.9150, 0.9048,
    ];

    #[test]
    fn mean_and_sample_std() {
        assert_eq!(mean(&[2.0, 4.0, 9.0]).unwrap(), 5.0);
        assert!(matches!(mean(&[]), Err(StatsError::Empty)));
        // Sample std of {2, 4, 9}: mean 5, ss = 9 + 1 + 16 = 26, /2 = 13.
        assert!((sample_std(&[2.0, 4.0, 9.0]).unwrap() - 13f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            sample_std(&[1.0]),
            Err(StatsError::TooFewSamples { needed: 2, got: 1 })
        ));
        assert!((mean(&ACC_FPZ).unwrap() - 0.919715).abs() < 1e-12);
        assert!((sample_std(&ACC_FPZ).unwrap() - 0.031546).abs() < 5e-7);
        assert!((mean(&ACC_DUAL).unwrap() - 0.926670).abs() < 1e-12);
        assert!((sample_std(&ACC_ENS).unwrap() - 0.023961).abs() < 5e-7);
    }

    #[test]
    fn erf_matches_reference_values() {
        // References computed with 50-digit arithmetic.
        let cases = [
            (0.0, 0.0),
            (0.1, 0.1124629160182848984),
            (0.5, 0.52049987781304653768),
            (1.0, 0.84270079294971486934),
            (1.5, 0.96610514647531072707),
            (2.0, 0.99532226501895273416),
            (3.0, 0.99997790950300141456),
            (4.5, 0.99999999980338395585),
            (6.0, 0.99999999999999997848),
        ];
        for (x, want) in cases {
            assert!((erf(x) - want).abs() < 1e-14, "erf({x}) = {} want {want}", erf(x));
            assert!((erf(-x) + want).abs() < 1e-14, "erf(-{x})");
        }
    }

    #[test]
    fn phi_matches_reference_values() {
        let cases = [
            (-3.0, 0.0013498980316300945267),
            (-1.0, 0.15865525393145705141),
            (-0.5, 0.30853753872598689636),
            (0.0, 0.5),
            (0.5, 0.69146246127401310364),
            (1.0, 0.84134474606854294859),
            (1.959963984540054, 0.97499999999999998912),
            (3.0, 0.99865010196836990547),
        ];
        for (x, want) in cases {
            assert!((phi(x) - want).abs() < 1e-14, "phi({x}) = {} want {want}", phi(x));
        }
    }

    #[test]
    fn kolmogorov_q_matches_reference_values() {
        let cases = [
            (0.5, 0.963945243664875),
            (0.8, 0.544142411574198),
            (1.0, 0.269999671677355),
            (1.2, 0.112249666670725),
            (1.5, 0.0222179626165251),
            (2.0, 0.000670925255779695),
        ];
        for (t, want) in cases {
            assert!(
                (kolmogorov_q(t) - want).abs() < 1e-12,
                "Q({t}) = {} want {want}",
                kolmogorov_q(t)
            );
        }
        assert_eq!(kolmogorov_q(0.0), 1.0);
        assert_eq!(kolmogorov_q(-3.0), 1.0);
        assert!(kolmogorov_q(0.3) > kolmogorov_q(0.9));
    }

    #[test]
    fn ks_normality_on_the_four_columns() {
        // Expected D and p computed independently (asymptotic Kolmogorov on
        // sqrt(n) * D after fitting mean and n-1 std).
        let cases: [(&[f64; 20], f64, f64); 4] = [
            (&ACC_FPZ, 0.175517488691, 0.568831446573),
            (&ACC_PZOZ, 0.317181741440, 0.035756299412),
            (&ACC_DUAL, 0.122743987628, 0.923889554336),
            (&ACC_ENS, 0.156711754709, 0.709842577866),
        ];
        for (sample, want_d, want_p) in cases {
            let r = ks_normality(sample).unwrap();
            assert_eq!(r.n, 20);
            assert!((r.statistic - want_d).abs() < 1e-9, "D = {} want {want_d}", r.statistic);
            assert!((r.p_value - want_p).abs() < 1e-9, "p = {} want {want_p}", r.p_value);
        }
        // Only the second column rejects normality at 0.05.
        assert!(ks_normality(&ACC_PZOZ).unwrap().p_value < 0.05);
        assert!(ks_normality(&ACC_FPZ).unwrap().p_value > 0.05);
    }

    #[test]
    fn ks_normality_rejects_degenerate_inputs() {
        assert!(matches!(
            ks_normality(&[1.0, 2.0]),
            Err(StatsError::TooFewSamples { needed: 3, got: 2 })
        ));
        assert!(matches!(
            ks_normality(&[4.0, 4.0, 4.0, 4.0]),
            Err(StatsError::DegenerateSample(_))
        ));
        assert!(matches!(
            ks_normality(&[1.0, f64::NAN, 2.0]),
            Err(StatsError::NonFinite(_))
        ));
    }

    #[test]
    fn wilcoxon_micro_case_is_exact() {
        // Five positive differences: W = 0, exact p = 2 / 2^5 = 0.0625.
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert_eq!(r.w_statistic, 0.0);
        assert_eq!(r.w_plus, 15.0);
        assert_eq!(r.n_effective, 5);
        assert_eq!(r.p_exact, Some(0.0625));
        assert_eq!(r.method, "exact");
    }

    #[test]
    fn wilcoxon_on_the_published_columns() {
        // Expectations computed independently by brute-force enumeration
        // and checked against a second implementation.
        let r = wilcoxon_signed_rank(&ACC_DUAL, &ACC_FPZ).unwrap();
        assert_eq!(r.n_effective, 20);
        assert_eq!(r.w_statistic, 45.0);
        assert_eq!(r.w_plus, 165.0);
        assert!((r.p_exact.unwrap() - 0.023950576782).abs() < 1e-12);
        assert!((r.p_asymptotic - 0.026331065547).abs() < 1e-12);

        let r = wilcoxon_signed_rank(&ACC_DUAL, &ACC_PZOZ).unwrap();
        assert_eq!(r.w_statistic, 25.0);
        assert!((r.p_exact.unwrap() - 0.001689910889).abs() < 1e-12);
        assert!((r.p_asymptotic - 0.002997957881).abs() < 1e-12);

        // One zero difference drops out and one tied pair of |d| midranks.
        let r = wilcoxon_signed_rank(&ACC_DUAL, &ACC_ENS).unwrap();
        assert_eq!(r.n_effective, 19);
        assert_eq!(r.w_statistic, 82.5);
        assert!((r.p_exact.unwrap() - 0.629592895508).abs() < 1e-12);
        assert!((r.p_asymptotic - 0.629127641078).abs() < 1e-12);
        assert!(r.p_value() > DEFAULT_ALPHA);
    }

    #[test]
    fn wilcoxon_edge_cases() {
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]),
            Err(StatsError::LengthMismatch { a: 1, b: 2 })
        ));
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]),
            Err(StatsError::AllZeroDifferences)
        ));
        // Perfectly balanced: p clamps to 1.
        let r = wilcoxon_signed_rank(&[1.0, -1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(r.w_plus, 1.5);
        assert_eq!(r.w_minus, 1.5);
        assert_eq!(r.p_exact, Some(1.0));
        // Above the exact limit the method switches.
        let a: Vec<f64> = (0..30).map(|i| i as f64 + if i % 3 == 0 { 0.5 } else { -0.25 }).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.p_exact, None);
        assert_eq!(r.method, "asymptotic");
        assert!(r.p_asymptotic > 0.0 && r.p_asymptotic < 1.0);
    }

    #[test]
    fn exact_enumeration_matches_naive_subset_sums() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(17);
        for _ in 0..20 {
            let n = rng.gen_range(1..=10);
            // Midrank-like values: halves between 1 and n.
            let ranks2: Vec<u64> = (0..n).map(|_| rng.gen_range(2..=2 * n as u64)).collect();
            let total: u64 = ranks2.iter().sum();
            let w2 = rng.gen_range(0..=total);
            let mut naive = 0u64;
            for mask in 0..(1u64 << n) {
                let s: u64 =
                    (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| ranks2[i]).sum();
                if s <= w2 {
                    naive += 1;
                }
            }
            let want = (2.0 * naive as f64 / (1u64 << n) as f64).min(1.0);
            assert_eq!(exact_two_sided_p(&ranks2, w2), want);
        }
    }

    fn rows_for(values: &[(&str, [f64; 5])]) -> Vec<FoldRow> {
        let mut rows = Vec::new();
        for (approach, vals) in values {
            for (i, &v) in vals.iter().enumerate() {
                rows.push(FoldRow {
                    fold_id: (i + 1) as u32,
                    approach: approach.to_string(),
                    accuracy: v,
                    kappa: v - 0.1,
                    f1_macro: v - 0.2,
                    coverage: 1.0,
                });
            }
        }
        rows
    }

    #[test]
    fn compare_approaches_pairs_and_flags() {
        let rows = rows_for(&[
            ("dual", [0.95, 0.93, 0.96, 0.94, 0.92]),
            ("fpz_cz", [0.91, 0.90, 0.92, 0.905, 0.895]),
        ]);
        let out = compare_approaches(&rows, &["accuracy", "kappa"], 0.10).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].approach_a, "dual");
        assert_eq!(out[0].approach_b, "fpz_cz");
        assert_eq!(out[0].metric, "accuracy");
        // All five differences positive: exact p = 0.0625 < 0.10.
        assert!((out[0].wilcoxon_p - 0.0625).abs() < 1e-15);
        assert_eq!(out[0].method, "exact");
        assert!(out[0].significant);
        assert!(out[0].ks_p_a > 0.0 && out[0].ks_p_a <= 1.0);
        // Same shifts for kappa.
        assert_eq!(out[1].metric, "kappa");
        assert!((out[1].wilcoxon_p - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn compare_approaches_identical_columns() {
        let rows = rows_for(&[
            ("a", [0.9, 0.91, 0.92, 0.93, 0.94]),
            ("b", [0.9, 0.91, 0.92, 0.93, 0.94]),
        ]);
        let out = compare_approaches(&rows, &["accuracy"], 0.05).unwrap();
        assert_eq!(out[0].method, "identical");
        assert_eq!(out[0].wilcoxon_p, 1.0);
        assert!(!out[0].significant);
    }

    #[test]
    fn compare_approaches_names_degenerate_columns() {
        let rows = rows_for(&[
            ("a", [0.90, 0.91, 0.92, 0.93, 0.94]),
            ("b", [0.85, 0.85, 0.85, 0.85, 0.85]),
        ]);
        match compare_approaches(&rows, &["accuracy"], 0.05).unwrap_err() {
            StatsError::DegenerateSample(msg) => assert!(msg.contains("accuracy of b"), "{msg}"),
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn compare_approaches_validates_input() {
        let mut rows = rows_for(&[
            ("a", [0.9, 0.91, 0.92, 0.93, 0.94]),
            ("b", [0.8, 0.81, 0.82, 0.83, 0.84]),
        ]);
        rows.pop();
        assert!(matches!(
            compare_approaches(&rows, &["accuracy"], 0.05),
            Err(StatsError::FoldMisalignment(_))
        ));
        let rows = rows_for(&[("a", [0.9, 0.91, 0.92, 0.93, 0.94])]);
        assert!(matches!(
            compare_approaches(&rows, &["f2_macro"], 0.05),
            Err(StatsError::UnknownMetric(_))
        ));
        let mut rows = rows_for(&[("a", [0.9, 0.91, 0.92, 0.93, 0.94])]);
        rows.push(rows[0].clone());
        assert!(matches!(
            compare_approaches(&rows, &["accuracy"], 0.05),
            Err(StatsError::DuplicateRow { .. })
        ));
    }

    #[test]
    fn comparison_csv_round_trips() {
        let rows = rows_for(&[
            ("dual", [0.95, 0.93, 0.96, 0.94, 0.92]),
            ("fpz_cz", [0.91, 0.90, 0.92, 0.905, 0.895]),
        ]);
        let out = compare_approaches(&rows, &["accuracy"], 0.05).unwrap();
        let text = comparisons_to_csv(&out).unwrap();
        assert_eq!(comparisons_from_csv(&text).unwrap(), out);
        let commented = format!("# comparisons\n{text}");
        assert_eq!(comparisons_from_csv(&commented).unwrap(), out);
        assert!(matches!(
            comparisons_from_csv("bad,header\n"),
            Err(StatsError::CsvFormat { .. })
        ));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("comparisons.csv");
        write_comparisons(&path, &out).unwrap();
        assert_eq!(read_comparisons(&path).unwrap(), out);
    }
}
