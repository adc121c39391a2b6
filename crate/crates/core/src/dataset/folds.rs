//! Leave-one-patient-out fold planning.

use super::{DatasetError, Result, Segment};
use crate::rng::{derive, seeded};
use rand::seq::SliceRandom;
use std::collections::BTreeSet;

/// Share of the non-test segments set aside for validation.
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.10;

/// Patients the full study design expects.
pub const STUDY_PATIENTS: usize = 20;

/// RNG stream id for validation-split selection (see [`crate::rng::derive`]).
const SPLIT_STREAM: u64 = 2;

/// One cross-validation fold. The three index lists (into the segment slice
/// the plan was built from) partition the usable segments: every segment of
/// the test patient is `test`, the rest split into `train` and `validation`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    /// 1-based fold number; fold `i` holds out the `i`-th patient in
    /// ascending patient-id order.
    pub fold_id: u32,
    pub test_patient: u32,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Plans one fold per patient, for any corpus of at least two patients.
///
/// `Excluded` segments never enter any list. The validation set is
/// `round(validation_fraction * pool)` segments, apportioned across the five
/// stages by largest remainder so class balance matches the pool as closely
/// as integer counts allow; within a class the pick is a seeded shuffle.
/// The same seed always yields the same plans.
pub fn leave_one_out_folds(
    segments: &[Segment],
    seed: u64,
    validation_fraction: f64,
) -> Result<Vec<FoldPlan>> {
    if !(0.0..1.0).contains(&validation_fraction) {
        return Err(DatasetError::Inconsistent(format!(
            "validation fraction {validation_fraction} outside [0, 1)"
        )));
    }
    let usable: Vec<usize> =
        (0..segments.len()).filter(|&i| segments[i].label.class_index().is_some()).collect();
    let patients: Vec<u32> = usable
        .iter()
        .map(|&i| segments[i].patient_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if patients.len() < 2 {
        return Err(DatasetError::TooFewPatients(patients.len()));
    }

    let mut rng = seeded(derive(seed, SPLIT_STREAM));
    let mut plans = Vec::with_capacity(patients.len());
    for (i, &patient) in patients.iter().enumerate() {
        let test: Vec<usize> =
            usable.iter().copied().filter(|&j| segments[j].patient_id == patient).collect();
        let pool: Vec<usize> =
            usable.iter().copied().filter(|&j| segments[j].patient_id != patient).collect();

        let target = (validation_fraction * pool.len() as f64).round() as usize;
        let mut by_class: [Vec<usize>; 5] = Default::default();
        for &j in &pool {
            by_class[segments[j].label.class_index().expect("usable segments have a class")]
                .push(j);
        }
        let quotas = largest_remainder_quotas(target, &by_class.each_ref().map(Vec::len));

        let mut validation = Vec::with_capacity(target);
        for (class, quota) in quotas.into_iter().enumerate() {
            by_class[class].shuffle(&mut rng);
            validation.extend_from_slice(&by_class[class][..quota]);
        }
        validation.sort_unstable();
        let chosen: BTreeSet<usize> = validation.iter().copied().collect();
        let train: Vec<usize> = pool.iter().copied().filter(|j| !chosen.contains(j)).collect();

        plans.push(FoldPlan {
            fold_id: (i + 1) as u32,
            test_patient: patient,
            train,
            validation,
            test,
        });
    }
    Ok(plans)
}

/// The full study design: exactly 20 patients, 10% validation.
pub fn build_folds(segments: &[Segment], seed: u64) -> Result<Vec<FoldPlan>> {
    let patients: BTreeSet<u32> = segments
        .iter()
        .filter(|s| s.label.class_index().is_some())
        .map(|s| s.patient_id)
        .collect();
    if patients.len() != STUDY_PATIENTS {
        return Err(DatasetError::WrongPatientCount {
            expected: STUDY_PATIENTS,
            got: patients.len(),
        });
    }
    leave_one_out_folds(segments, seed, DEFAULT_VALIDATION_FRACTION)
}

/// Apportions `target` slots across classes proportionally to `sizes`,
/// flooring first and then handing the leftover slots to the largest
/// fractional remainders (ties to the lower class index). The result sums
/// to `target` exactly and never exceeds a class's size.
fn largest_remainder_quotas(target: usize, sizes: &[usize; 5]) -> [usize; 5] {
    let n: usize = sizes.iter().sum();
    if n == 0 || target == 0 {
        return [0; 5];
    }
    let mut quotas = [0usize; 5];
    let mut remainders = [(0usize, 0usize); 5];
    let mut assigned = 0;
    for c in 0..5 {
        let exact_num = target * sizes[c];
        quotas[c] = exact_num / n;
        remainders[c] = (exact_num % n, c);
        assigned += quotas[c];
    }
    let mut order = remainders;
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(rem, c) in order.iter().take(target - assigned) {
        debug_assert!(rem > 0, "flooring left fewer leftovers than classes with remainders");
        quotas[c] += 1;
    }
    quotas
}
