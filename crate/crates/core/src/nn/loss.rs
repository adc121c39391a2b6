//! Cross-entropy loss.

use super::{NnError, Result};

/// Cross-entropy `H(p, q) = -sum_i p_i ln q_i` between a target distribution
/// `p` and a predicted distribution `q`, in nats.
///
/// Returns the loss and its gradient with respect to the *logits* that
/// produced `q` via softmax, which collapses to the well-known `q - p`.
/// `q` must be a strictly positive distribution (softmax output always is);
/// `p` must be non-negative and sum to one. Both sums are checked to 1e-9.
pub fn cross_entropy(p: &[f64], q: &[f64]) -> Result<(f64, Vec<f64>)> {
    if p.len() != q.len() {
        return Err(NnError::ShapeMismatch(format!(
            "cross_entropy: target has {} classes, prediction has {}",
            p.len(),
            q.len()
        )));
    }
    if p.is_empty() {
        return Err(NnError::ShapeMismatch("cross_entropy of empty vectors".into()));
    }
    for (name, dist) in [("target", p), ("prediction", q)] {
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(NnError::DistributionInvalid(format!(
                "{name} sums to {sum}, not 1"
            )));
        }
    }
    if p.iter().any(|&v| v < 0.0) {
        return Err(NnError::DistributionInvalid("target has a negative mass".into()));
    }
    if q.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(NnError::DistributionInvalid(
            "prediction must be strictly positive and finite".into(),
        ));
    }
    let loss = -p
        .iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * qi.ln())
        .sum::<f64>();
    let grad = q.iter().zip(p).map(|(&qi, &pi)| qi - pi).collect();
    Ok((loss, grad))
}

/// One-hot target distribution for `class` out of `n` classes.
pub fn one_hot(class: usize, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    p[class] = 1.0;
    p
}
