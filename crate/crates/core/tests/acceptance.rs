//! Acceptance suite: one test per release gate, each printing a single
//! `acceptance N (...): PASS` line (run with `-- --nocapture` to see them).
//!
//! The oracles here are deliberately independent of the crate's internals:
//! finite differences, metric arithmetic, and vote counting are written from
//! scratch in this file, so a shared bug cannot vouch for itself.

use chrono::NaiveDate;
use rand::Rng;
use somnoscore::dataset::{
    leave_one_out_folds, load_recording, prepare_dataset, scan_corpus, segment_recording,
    standardize, Approach, Segment, StandardizeMode, SEGMENT_SAMPLES,
};
use somnoscore::edf::{
    parse_annotations, parse_header, read_signal, tal, write_synthetic_edf, AnnotationEvent,
    EdfError, EdfHeader, SignalSpec,
};
use somnoscore::eval::{
    aggregate_by_approach, evaluate_single, majority_vote, read_fold_rows, ConfusionMatrix,
    EvalError, FoldRow, VoteOutcome, SUMMARY_METRICS,
};
use somnoscore::model::{build_model, Mode, ModelParams, ModelSpec};
use somnoscore::nn::{
    cross_entropy, dropout_backward, dropout_forward, loss::one_hot, max_pool2,
    max_pool2_backward, softmax, Activation, Conv1d, Dense, Tensor,
};
use somnoscore::rng::{derive, seeded, SeededRng};
use somnoscore::stats::wilcoxon_signed_rank;
use somnoscore::training::{train_fold, TrainConfig};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

// ---------------------------------------------------------------------------
// 1. Parameter counts
// ---------------------------------------------------------------------------

#[test]
fn acceptance_01_parameter_counts() {
    let single = build_model(1, 1).expect("single-channel model");
    let dual = build_model(2, 1).expect("dual-channel model");

    assert_eq!(ModelSpec::for_channels(1).unwrap().param_count(), 13_485);
    assert_eq!(single.count_params(), 13_485);
    assert_eq!(ModelSpec::for_channels(2).unwrap().param_count(), 13_625);
    assert_eq!(dual.count_params(), 13_625);
    // The three-member ensemble: two single-channel scorers plus one dual.
    assert_eq!(2 * single.count_params() + dual.count_params(), 40_595);

    println!("acceptance 1 (parameter counts 13485 / 13625 / 40595): PASS");
}

// ---------------------------------------------------------------------------
// 2. Forward shapes
// ---------------------------------------------------------------------------

#[test]
fn acceptance_02_forward_shapes() {
    for n_channels in [1usize, 2] {
        let spec = ModelSpec::for_channels(n_channels).unwrap();
        assert_eq!(
            spec.temporal_trace(),
            vec![3000, 2994, 1497, 1491, 745, 741, 370, 366, 183, 180, 90, 87, 43, 41, 20],
            "{n_channels}-channel temporal trace"
        );
        assert_eq!(spec.flatten_features(), 400);

        let model = build_model(n_channels, 2).unwrap();
        let x = Tensor::new(vec![n_channels, 3000], vec![0.25; n_channels * 3000]).unwrap();
        let cache = model.forward_cached(&x, Mode::Infer).unwrap();
        assert_eq!(cache.pooled.last().unwrap().output.shape(), [20, 20]);
        assert_eq!(cache.dense_in.len(), 400, "{n_channels}-channel flatten width");
        assert_eq!(cache.probs.len(), 5);
        assert!((cache.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    println!("acceptance 2 (1- and 2-channel forward passes flatten to 400 features): PASS");
}

// ---------------------------------------------------------------------------
// 3. Gradients against central finite differences
// ---------------------------------------------------------------------------

const TOL_LAYER: f64 = 1e-5;
const TOL_E2E: f64 = 1e-4;
const FD_STEPS: [f64; 2] = [1e-5, 1e-6];

fn rand_vec(rng: &mut SeededRng, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-amp..amp)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative error with an absolute floor, so near-zero pairs compare in
/// absolute terms instead of dividing by noise.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

enum Probe {
    Ok,
    /// The numeric estimate is step-size dependent: the coordinate sits on a
    /// ReLU or pooling kink, where a central difference is meaningless.
    Kink,
    Bad(String),
}

fn fd_probe(analytic: f64, tol: f64, mut loss_at: impl FnMut(f64) -> f64) -> Probe {
    let est: Vec<f64> =
        FD_STEPS.iter().map(|&h| (loss_at(h) - loss_at(-h)) / (2.0 * h)).collect();
    if est.iter().any(|&e| rel_err(analytic, e) <= tol) {
        return Probe::Ok;
    }
    if rel_err(est[0], est[1]) > tol {
        return Probe::Kink;
    }
    Probe::Bad(format!("analytic {analytic}, numeric {} / {}", est[0], est[1]))
}

/// Verifies one randomly chosen coordinate of an analytic gradient against a
/// central difference. Coordinates that land on a kink are resampled: the
/// derivative does not exist there, so neither estimate is testable.
fn check_coord(
    rng: &mut SeededRng,
    n: usize,
    tol: f64,
    analytic: impl Fn(usize) -> f64,
    mut loss_at: impl FnMut(usize, f64) -> f64,
) -> Result<(), String> {
    for _ in 0..12 {
        let i = rng.gen_range(0..n);
        match fd_probe(analytic(i), tol, |h| loss_at(i, h)) {
            Probe::Ok => return Ok(()),
            Probe::Kink => continue,
            Probe::Bad(msg) => return Err(format!("coordinate {i}: {msg}")),
        }
    }
    Err("every probed coordinate sat on a kink".into())
}

fn conv_case(case: u64) -> Result<(), String> {
    let mut rng = seeded(derive(0xC0, case));
    let ci = rng.gen_range(1..=3usize);
    let co = rng.gen_range(1..=4usize);
    let k = rng.gen_range(2..=5usize);
    let len = k + rng.gen_range(0..=10usize);
    let out_len = len - k + 1;
    let activation = if case % 2 == 0 { Activation::Relu } else { Activation::Linear };

    let layer = Conv1d::new(
        Tensor::new(vec![co, ci, k], rand_vec(&mut rng, co * ci * k, 1.0)).unwrap(),
        Tensor::new(vec![co], rand_vec(&mut rng, co, 0.5)).unwrap(),
        activation,
    )
    .unwrap();
    let x = Tensor::new(vec![ci, len], rand_vec(&mut rng, ci * len, 1.0)).unwrap();
    let c = rand_vec(&mut rng, co * out_len, 1.0);
    let loss = |layer: &Conv1d, x: &Tensor| dot(layer.forward(x).unwrap().data(), &c);

    let y = layer.forward(&x).unwrap();
    let dy = Tensor::new(vec![co, out_len], c.clone()).unwrap();
    let g = layer.backward(&x, &y, &dy).unwrap();

    check_coord(&mut rng, x.len(), TOL_LAYER, |i| g.input.data()[i], |i, h| {
        let mut xp = x.clone();
        xp.data_mut()[i] += h;
        loss(&layer, &xp)
    })
    .map_err(|e| format!("conv input: {e}"))?;
    check_coord(&mut rng, layer.kernel.len(), TOL_LAYER, |i| g.kernel.data()[i], |i, h| {
        let mut lp = layer.clone();
        lp.kernel.data_mut()[i] += h;
        loss(&lp, &x)
    })
    .map_err(|e| format!("conv kernel: {e}"))?;
    check_coord(&mut rng, co, TOL_LAYER, |i| g.bias.data()[i], |i, h| {
        let mut lp = layer.clone();
        lp.bias.data_mut()[i] += h;
        loss(&lp, &x)
    })
    .map_err(|e| format!("conv bias: {e}"))
}

fn pool_case(case: u64) -> Result<(), String> {
    let mut rng = seeded(derive(0xB1, case));
    let ch = rng.gen_range(1..=3usize);
    let len = rng.gen_range(2..=16usize);
    let x = Tensor::new(vec![ch, len], rand_vec(&mut rng, ch * len, 1.0)).unwrap();
    let c = rand_vec(&mut rng, ch * (len / 2), 1.0);

    let pooled = max_pool2(&x).unwrap();
    let dy = Tensor::new(vec![ch, len / 2], c.clone()).unwrap();
    let dx = max_pool2_backward(&pooled, x.shape(), &dy).unwrap();
    let loss = |x: &Tensor| dot(max_pool2(x).unwrap().output.data(), &c);

    for _ in 0..3 {
        check_coord(&mut rng, x.len(), TOL_LAYER, |i| dx.data()[i], |i, h| {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            loss(&xp)
        })
        .map_err(|e| format!("pool input: {e}"))?;
    }
    Ok(())
}

fn dense_case(case: u64) -> Result<(), String> {
    let mut rng = seeded(derive(0xDE, case));
    let n_in = rng.gen_range(1..=8usize);
    let n_out = rng.gen_range(1..=6usize);
    let layer = Dense::new(
        Tensor::new(vec![n_in, n_out], rand_vec(&mut rng, n_in * n_out, 1.0)).unwrap(),
        Tensor::new(vec![n_out], rand_vec(&mut rng, n_out, 0.5)).unwrap(),
    )
    .unwrap();
    let x = rand_vec(&mut rng, n_in, 1.0);
    let c = rand_vec(&mut rng, n_out, 1.0);
    let loss = |layer: &Dense, x: &[f64]| dot(&layer.forward(x).unwrap(), &c);

    let g = layer.backward(&x, &c).unwrap();

    check_coord(&mut rng, n_in, TOL_LAYER, |i| g.input[i], |i, h| {
        let mut xp = x.clone();
        xp[i] += h;
        loss(&layer, &xp)
    })
    .map_err(|e| format!("dense input: {e}"))?;
    check_coord(&mut rng, n_in * n_out, TOL_LAYER, |i| g.weights.data()[i], |i, h| {
        let mut lp = layer.clone();
        lp.weights.data_mut()[i] += h;
        loss(&lp, &x)
    })
    .map_err(|e| format!("dense weights: {e}"))?;
    check_coord(&mut rng, n_out, TOL_LAYER, |i| g.bias.data()[i], |i, h| {
        let mut lp = layer.clone();
        lp.bias.data_mut()[i] += h;
        loss(&lp, &x)
    })
    .map_err(|e| format!("dense bias: {e}"))
}

fn dropout_case(case: u64) -> Result<(), String> {
    let mut rng = seeded(derive(0xD0, case));
    let ch = rng.gen_range(1..=2usize);
    let n = rng.gen_range(2..=12usize);
    let rate = [0.2, 0.5, 0.7][(case % 3) as usize];
    let x = Tensor::new(vec![ch, n], rand_vec(&mut rng, ch * n, 1.0)).unwrap();

    let (out, mask) = dropout_forward(&x, rate, true, &mut seeded(derive(0xD1, case))).unwrap();
    let keep = 1.0 / (1.0 - rate);
    for i in 0..x.len() {
        let m = mask.data()[i];
        if m != 0.0 && (m - keep).abs() > 1e-12 {
            return Err(format!("mask value {m} is neither 0 nor 1/(1-rate)"));
        }
        if (out.data()[i] - x.data()[i] * m).abs() > 1e-12 {
            return Err(format!("output is not input * mask at {i}"));
        }
    }

    // With the mask fixed, the map is x -> x * mask; differentiate through it.
    let c = rand_vec(&mut rng, ch * n, 1.0);
    let dy = Tensor::new(vec![ch, n], c.clone()).unwrap();
    let dx = dropout_backward(&mask, &dy).unwrap();
    let loss = |x: &Tensor| {
        x.data().iter().zip(mask.data()).zip(&c).map(|((a, m), w)| a * m * w).sum::<f64>()
    };
    for _ in 0..2 {
        check_coord(&mut rng, x.len(), TOL_LAYER, |i| dx.data()[i], |i, h| {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            loss(&xp)
        })
        .map_err(|e| format!("dropout input: {e}"))?;
    }

    // Inference must be the identity with an all-ones mask.
    let (out_inf, mask_inf) =
        dropout_forward(&x, rate, false, &mut seeded(derive(0xD2, case))).unwrap();
    if out_inf.data() != x.data() || mask_inf.data().iter().any(|&m| m != 1.0) {
        return Err("inference-mode dropout is not the identity".into());
    }
    Ok(())
}

fn softmax_ce_case(case: u64) -> Result<(), String> {
    let mut rng = seeded(derive(0x5E, case));
    let n = rng.gen_range(2..=6usize);
    let logits = rand_vec(&mut rng, n, 2.0);
    let class = rng.gen_range(0..n);
    let p = one_hot(class, n);
    let loss = |logits: &[f64]| cross_entropy(&p, &softmax(logits).unwrap()).unwrap().0;

    let (_, grad) = cross_entropy(&p, &softmax(&logits).unwrap()).unwrap();
    for i in 0..n {
        match fd_probe(grad[i], TOL_LAYER, |h| {
            let mut lp = logits.clone();
            lp[i] += h;
            loss(&lp)
        }) {
            Probe::Ok => {}
            Probe::Kink => return Err("softmax+CE has no kinks, got a step-size split".into()),
            Probe::Bad(msg) => return Err(format!("logit {i}: {msg}")),
        }
    }
    Ok(())
}

fn end_to_end_case(case: u64) -> Result<(), String> {
    let mut rng = seeded(derive(0xE0, case));
    let n_channels = 1 + (case % 2) as usize;
    let model = build_model(n_channels, derive(0xE1, case)).unwrap();
    let x =
        Tensor::new(vec![n_channels, 3000], rand_vec(&mut rng, n_channels * 3000, 0.5)).unwrap();
    let class = (case % 5) as usize;

    let cache = model.forward_cached(&x, Mode::Infer).unwrap();
    let (loss, grads) = model.backward(&cache, class).unwrap();
    if (loss + cache.probs[class].ln()).abs() > 1e-12 {
        return Err("reported loss is not -ln q_class".into());
    }

    for _ in 0..2 {
        let t = rng.gen_range(0..grads.tensors.len());
        check_coord(&mut rng, grads.tensors[t].len(), TOL_E2E, |i| grads.tensors[t].data()[i], |i, h| {
            let mut m = model.clone();
            m.param_tensors_mut()[t].data_mut()[i] += h;
            -m.forward(&x).unwrap()[class].ln()
        })
        .map_err(|e| format!("{}: {e}", model.param_names()[t]))?;
    }
    Ok(())
}

#[test]
fn acceptance_03_gradients_match_finite_differences() {
    let start = Instant::now();
    for case in 0..100u64 {
        conv_case(case).unwrap_or_else(|e| panic!("conv case {case}: {e}"));
        pool_case(case).unwrap_or_else(|e| panic!("pool case {case}: {e}"));
        dense_case(case).unwrap_or_else(|e| panic!("dense case {case}: {e}"));
        dropout_case(case).unwrap_or_else(|e| panic!("dropout case {case}: {e}"));
        softmax_ce_case(case).unwrap_or_else(|e| panic!("softmax+CE case {case}: {e}"));
    }
    for case in 0..100u64 {
        end_to_end_case(case).unwrap_or_else(|e| panic!("end-to-end case {case}: {e}"));
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "gradient suite took {elapsed:?}, budget is 60 s");
    println!("acceptance 3 (finite-difference gradient checks, per layer and end to end): PASS");
}

// ---------------------------------------------------------------------------
// 4. Metric oracles
// ---------------------------------------------------------------------------

/// From-scratch recomputation of every metric from raw counts.
fn check_against_oracle(m: &ConfusionMatrix, counts: &[[u64; 6]; 5]) {
    let total: u64 = counts.iter().flatten().sum();
    let n = total as f64;
    let diag: u64 = (0..5).map(|c| counts[c][c]).sum();
    let classified: u64 = counts.iter().map(|row| row[..5].iter().sum::<u64>()).sum();

    assert!((m.accuracy().unwrap() - diag as f64 / n).abs() <= 1e-12);
    assert!((m.coverage().unwrap() - classified as f64 / n).abs() <= 1e-12);
    match m.classified_accuracy().unwrap() {
        None => assert_eq!(classified, 0),
        Some(a) => assert!((a - diag as f64 / classified as f64).abs() <= 1e-12),
    }

    let mut f1s = Vec::new();
    for c in 0..5 {
        let tp = counts[c][c];
        let fp: u64 = (0..5).filter(|&t| t != c).map(|t| counts[t][c]).sum();
        let fne: u64 = (0..6).filter(|&p| p != c).map(|p| counts[c][p]).sum();
        let expect = if tp + fp + fne == 0 {
            None
        } else {
            Some(2.0 * tp as f64 / (2 * tp + fp + fne) as f64)
        };
        match (m.f1_per_class()[c], expect) {
            (None, None) => {}
            (Some(got), Some(want)) => {
                assert!((got - want).abs() <= 1e-12, "f1 class {c}: {got} vs {want}");
                f1s.push(want);
            }
            (got, want) => panic!("f1 class {c}: {got:?} vs {want:?}"),
        }
    }
    if !f1s.is_empty() {
        let want = f1s.iter().sum::<f64>() / f1s.len() as f64;
        assert!((m.f1_macro().unwrap() - want).abs() <= 1e-12);
    }

    let p_o = diag as f64 / n;
    let p_e: f64 = (0..5)
        .map(|c| {
            let row: u64 = counts[c].iter().sum();
            let col: u64 = (0..5).map(|t| counts[t][c]).sum();
            (row as f64 / n) * (col as f64 / n)
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        assert!(matches!(m.cohen_kappa(), Err(EvalError::DegenerateAgreement)));
    } else {
        let want = (p_o - p_e) / (1.0 - p_e);
        assert!((m.cohen_kappa().unwrap() - want).abs() <= 1e-12, "kappa vs {want}");
    }
}

fn matrix_from(counts: &[[u64; 6]; 5]) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::new();
    for (t, row) in counts.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            for _ in 0..count {
                m.record(t, (p < 5).then_some(p)).unwrap();
            }
        }
    }
    m
}

#[test]
fn acceptance_04_metric_oracles() {
    // Spot value: 2 classes, 18 hits and 2 misses -> P_o 0.9, P_e 0.5, kappa 0.8.
    let mut spot = [[0u64; 6]; 5];
    spot[0][0] = 9;
    spot[0][1] = 1;
    spot[1][0] = 1;
    spot[1][1] = 9;
    let m = matrix_from(&spot);
    assert!((m.accuracy().unwrap() - 0.9).abs() <= 1e-12);
    assert!((m.cohen_kappa().unwrap() - 0.8).abs() <= 1e-12);

    // A purely diagonal matrix has kappa exactly 1.
    let mut diag = [[0u64; 6]; 5];
    for c in 0..5 {
        diag[c][c] = c as u64 + 1;
    }
    assert!((matrix_from(&diag).cohen_kappa().unwrap() - 1.0).abs() <= 1e-15);

    let mut rng = seeded(4004);
    for case in 0..1000u64 {
        let mut counts = [[0u64; 6]; 5];
        if case % 37 == 0 {
            // All mass in one diagonal cell: chance agreement is 1.
            let c = rng.gen_range(0..5usize);
            counts[c][c] = rng.gen_range(1..=20);
        } else {
            for _ in 0..rng.gen_range(1..=30usize) {
                counts[rng.gen_range(0..5usize)][rng.gen_range(0..6usize)] +=
                    rng.gen_range(1..=9u64);
            }
        }
        if counts.iter().flatten().all(|&c| c == 0) {
            counts[rng.gen_range(0..5usize)][rng.gen_range(0..6usize)] = 1;
        }
        check_against_oracle(&matrix_from(&counts), &counts);
    }
    println!("acceptance 4 (metric oracles over 1000 random confusion matrices): PASS");
}

// ---------------------------------------------------------------------------
// 5. Majority vote, exhaustively
// ---------------------------------------------------------------------------

#[test]
fn acceptance_05_majority_vote_exhaustive() {
    let mut ties = 0;
    for a in 0..5usize {
        for b in 0..5usize {
            for c in 0..5usize {
                let got = majority_vote(&[a, b, c]).unwrap();
                let mut tally = [0usize; 5];
                tally[a] += 1;
                tally[b] += 1;
                tally[c] += 1;
                let top = *tally.iter().max().unwrap();
                let winners: Vec<usize> = (0..5).filter(|&k| tally[k] == top).collect();
                let want = if winners.len() == 1 {
                    VoteOutcome::Class(winners[0])
                } else {
                    VoteOutcome::Tie
                };
                assert_eq!(got, want, "votes [{a}, {b}, {c}]");
                if want == VoteOutcome::Tie {
                    ties += 1;
                }
            }
        }
    }
    // With three voters over five classes a tie needs all-distinct votes.
    assert_eq!(ties, 5 * 4 * 3);
    println!("acceptance 5 (majority vote matches the counting oracle on all 125 triples): PASS");
}

// ---------------------------------------------------------------------------
// 6. Reference results table
// ---------------------------------------------------------------------------

fn reference_csv() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/reference_results.csv")
}

fn accuracy_column(rows: &[FoldRow], approach: &str) -> Vec<f64> {
    let mut v: Vec<(u32, f64)> = rows
        .iter()
        .filter(|r| r.approach == approach)
        .map(|r| (r.fold_id, r.accuracy))
        .collect();
    v.sort_by_key(|&(id, _)| id);
    v.into_iter().map(|(_, a)| a).collect()
}

#[test]
fn acceptance_06_reference_table_statistics() {
    let rows = read_fold_rows(&reference_csv()).expect("reference results fixture");
    assert_eq!(rows.len(), 80, "20 folds x 4 scoring approaches");

    assert_eq!(SUMMARY_METRICS[0], "accuracy");
    let agg = aggregate_by_approach(&rows).unwrap();
    for (name, published) in
        [("fpz_cz", 0.9197), ("pz_oz", 0.9016), ("dual", 0.9267), ("ensemble", 0.9265)]
    {
        let mean = agg[name][0].mean;
        assert!(
            (mean - published).abs() <= 5e-4,
            "{name}: mean accuracy {mean:.6} vs published {published}"
        );
    }

    let dual = accuracy_column(&rows, "dual");
    for (other, published_p) in [("fpz_cz", 0.0251), ("pz_oz", 0.0028)] {
        let r = wilcoxon_signed_rank(&dual, &accuracy_column(&rows, other)).unwrap();
        let exact = r.p_exact.expect("20 pairs is within the exact-enumeration range");
        println!(
            "  dual vs {other} accuracy: exact p {exact:.6}, asymptotic p {:.6}",
            r.p_asymptotic
        );
        assert!(
            (exact - published_p).abs() <= 5e-3,
            "dual vs {other}: exact p {exact:.6} vs published {published_p}"
        );
        assert!(
            (r.p_asymptotic - published_p).abs() <= 5e-3,
            "dual vs {other}: asymptotic p {:.6} vs published {published_p}",
            r.p_asymptotic
        );
    }
    println!("acceptance 6 (reference table aggregates and signed-rank p-values): PASS");
}

// ---------------------------------------------------------------------------
// 7. Smallest-case exact Wilcoxon
// ---------------------------------------------------------------------------

#[test]
fn acceptance_07_wilcoxon_smallest_case_is_exact() {
    let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
    assert_eq!(r.w_statistic, 0.0);
    assert_eq!(r.p_exact, Some(0.0625));
    assert_eq!(r.p_value(), 0.0625);
    println!("acceptance 7 (all-positive five-pair Wilcoxon gives exact p 0.0625): PASS");
}

// ---------------------------------------------------------------------------
// 8. EDF round trips, TAL fixtures, malformed inputs
// ---------------------------------------------------------------------------

fn make_header(rng: &mut SeededRng, n_signals: usize, n_records: i64, duration: f64) -> EdfHeader {
    let date = NaiveDate::from_ymd_opt(
        rng.gen_range(1985..=2084),
        rng.gen_range(1..=12),
        rng.gen_range(1..=28),
    )
    .unwrap();
    EdfHeader {
        version: "0".into(),
        patient_info: format!("P{:05} case", rng.gen_range(0..100_000u32)),
        recording_info: format!("Startdate run {}", rng.gen_range(0..1000u32)),
        start_datetime: date
            .and_hms_opt(rng.gen_range(0..24), rng.gen_range(0..60), rng.gen_range(0..60))
            .unwrap(),
        header_bytes: 256 * (1 + n_signals),
        reserved: "EDF+C".into(),
        n_data_records: n_records,
        record_duration: duration,
        n_signals,
    }
}

fn random_spec(rng: &mut SeededRng, idx: usize) -> SignalSpec {
    // Integer-valued ranges keep every header field inside its 8 ASCII chars,
    // so the writer can represent them exactly.
    let physical_min = rng.gen_range(-500..=-1) as f64;
    let physical_max = rng.gen_range(1..=500) as f64;
    SignalSpec {
        label: format!("EEG ch{idx}"),
        transducer: "AgAgCl electrode".into(),
        physical_dimension: "uV".into(),
        physical_min,
        physical_max,
        digital_min: rng.gen_range(-2048..=-16),
        digital_max: rng.gen_range(16..=2047),
        prefiltering: "HP:0.5Hz LP:40Hz".into(),
        samples_per_record: rng.gen_range(1..=40usize),
        reserved: String::new(),
    }
}

const EVENT_TEXTS: [&str; 5] =
    ["Sleep stage W", "Sleep stage R", "Movement time", "lights off", "note 42"];

fn event_key(e: &AnnotationEvent) -> (u64, u64, String) {
    (e.onset_seconds.to_bits(), e.duration_seconds.to_bits(), e.text.clone())
}

#[test]
fn acceptance_08_edf_round_trips_and_malformed_inputs() {
    let mut rng = seeded(0x8EDF);

    for case in 0..1000u64 {
        let n_eeg = rng.gen_range(0..=3usize);
        let n_records = rng.gen_range(1..=4usize);
        let duration = [0.5, 1.0, 2.0, 30.0][(case % 4) as usize];
        let n_events = rng.gen_range(0..=4usize);

        let specs: Vec<SignalSpec> = (0..n_eeg).map(|i| random_spec(&mut rng, i)).collect();
        // Samples on each signal's digital grid round-trip bit for bit.
        let data: Vec<Vec<f64>> = specs
            .iter()
            .map(|s| {
                (0..s.samples_per_record * n_records)
                    .map(|_| s.digital_to_physical(rng.gen_range(s.digital_min..=s.digital_max)))
                    .collect()
            })
            .collect();
        let events: Vec<AnnotationEvent> = (0..n_events)
            .map(|_| AnnotationEvent {
                onset_seconds: rng.gen_range(0..=12_000u32) as f64 / 100.0,
                duration_seconds: rng.gen_range(0..=6000u32) as f64 / 100.0,
                text: EVENT_TEXTS[rng.gen_range(0..EVENT_TEXTS.len())].to_string(),
            })
            .collect();

        let total_signals = n_eeg + usize::from(!events.is_empty());
        let header = make_header(&mut rng, total_signals, n_records as i64, duration);
        let bytes = write_synthetic_edf(&header, &specs, &data, &events)
            .unwrap_or_else(|e| panic!("case {case}: write failed: {e}"));

        let (parsed, parsed_specs) =
            parse_header(&bytes).unwrap_or_else(|e| panic!("case {case}: parse failed: {e}"));
        assert_eq!(parsed.version, "0");
        assert_eq!(parsed.patient_info, header.patient_info, "case {case}");
        assert_eq!(parsed.recording_info, header.recording_info, "case {case}");
        assert_eq!(parsed.start_datetime, header.start_datetime, "case {case}");
        assert_eq!(parsed.record_duration, duration, "case {case}");
        assert_eq!(parsed.n_signals, total_signals, "case {case}");
        assert_eq!(parsed.header_bytes, 256 * (1 + total_signals), "case {case}");

        for (spec, samples) in specs.iter().zip(&data) {
            assert_eq!(parsed_specs.iter().find(|s| s.label == spec.label).unwrap(), spec);
            let got = read_signal(&bytes, &parsed, &parsed_specs, &spec.label)
                .unwrap_or_else(|e| panic!("case {case}: read {}: {e}", spec.label));
            assert_eq!(&got, samples, "case {case}: {} samples", spec.label);
        }

        let mut got_events = parse_annotations(&bytes, &parsed, &parsed_specs)
            .unwrap_or_else(|e| panic!("case {case}: annotations: {e}"));
        got_events.sort_by_key(event_key);
        let mut want_events = events.clone();
        want_events.sort_by_key(event_key);
        assert_eq!(got_events, want_events, "case {case}");
    }

    // TAL grammar fixtures, straight through the chunk parser.
    let mut out = Vec::new();
    tal::parse_chunk(b"+30\x1560\x14Sleep stage W\x14\x00", &mut out).unwrap();
    assert_eq!(
        out,
        vec![AnnotationEvent {
            onset_seconds: 30.0,
            duration_seconds: 60.0,
            text: "Sleep stage W".into(),
        }]
    );

    out.clear();
    tal::parse_chunk(b"+0.5\x14first\x14second\x14\x00", &mut out).unwrap();
    assert_eq!(out.len(), 2, "one TAL with two texts is two events");
    assert!(out.iter().all(|e| e.onset_seconds == 0.5 && e.duration_seconds == 0.0));
    assert_eq!((out[0].text.as_str(), out[1].text.as_str()), ("first", "second"));

    out.clear();
    tal::parse_chunk(b"-7.25\x14negative onset\x14\x00", &mut out).unwrap();
    assert_eq!(out[0].onset_seconds, -7.25);

    out.clear();
    tal::parse_chunk(b"+123\x14\x14\x00\x00\x00", &mut out).unwrap();
    assert!(out.is_empty(), "timekeeping TALs and padding produce no events");

    let mut sink = Vec::new();
    for (label, chunk, want_onset_error) in [
        ("unsigned onset", b"30\x14x\x14\x00".as_slice(), true),
        ("garbled onset", b"+3a\x14x\x14\x00", true),
        ("no text separator", b"+30\x1560", false),
        ("unterminated text", b"+1\x14text", false),
        ("garbage in padding", b"+1\x14ok\x14\x00\x00Z\x00", false),
    ] {
        sink.clear();
        let err = tal::parse_chunk(chunk, &mut sink).expect_err(label);
        match (want_onset_error, &err) {
            (true, EdfError::NonNumericOnset(_)) | (false, EdfError::MalformedTal(_)) => {}
            _ => panic!("{label}: unexpected error {err:?}"),
        }
    }

    // Corrupt whole files.
    let mut spec = random_spec(&mut rng, 0);
    spec.samples_per_record = 4;
    let data: Vec<f64> =
        (0..8).map(|d| spec.digital_to_physical(spec.digital_min + d)).collect();
    let event = AnnotationEvent {
        onset_seconds: 0.5,
        duration_seconds: 0.0,
        text: "Sleep stage W".into(),
    };
    let header = make_header(&mut rng, 2, 2, 1.0);
    let good = write_synthetic_edf(&header, &[spec.clone()], &[data], &[event.clone()]).unwrap();
    let (h, specs) = parse_header(&good).unwrap();

    assert!(matches!(parse_header(&good[..128]), Err(EdfError::TruncatedHeader { .. })));
    assert!(matches!(parse_header(&good[..300]), Err(EdfError::TruncatedHeader { .. })));

    let mut bad_size = good.clone();
    bad_size[184..192].copy_from_slice(b"9999    ");
    assert!(matches!(parse_header(&bad_size), Err(EdfError::InconsistentHeaderSize { .. })));

    assert!(matches!(
        read_signal(&good[..good.len() - 1], &h, &specs, "EEG ch0"),
        Err(EdfError::TruncatedRecord(_))
    ));

    // An annotation-only file's data area is raw TAL bytes: patch it.
    let ann_header = make_header(&mut rng, 1, 1, 1.0);
    let ann_only = write_synthetic_edf(&ann_header, &[], &[], &[event]).unwrap();
    let (ah, aspecs) = parse_header(&ann_only).unwrap();
    assert_eq!(parse_annotations(&ann_only, &ah, &aspecs).unwrap().len(), 1);

    // The second '+' starts the real event's onset; break its sign.
    let data_start = ah.header_bytes;
    let plus = ann_only[data_start..]
        .iter()
        .enumerate()
        .filter(|&(_, &b)| b == b'+')
        .nth(1)
        .map(|(i, _)| data_start + i)
        .expect("timekeeping and event onsets");
    let mut bad_onset = ann_only.clone();
    bad_onset[plus] = b'x';
    assert!(matches!(
        parse_annotations(&bad_onset, &ah, &aspecs),
        Err(EdfError::NonNumericOnset(_))
    ));

    // Overwrite every TAL terminator: the chunk no longer parses.
    let mut bad_tal = ann_only.clone();
    for b in &mut bad_tal[data_start..] {
        if *b == 0 {
            *b = b'Z';
        }
    }
    assert!(matches!(
        parse_annotations(&bad_tal, &ah, &aspecs),
        Err(EdfError::MalformedTal(_))
    ));

    println!("acceptance 8 (EDF round trips, TAL fixtures, malformed-input errors): PASS");
}

// ---------------------------------------------------------------------------
// 9. Training smoke test on a separable synthetic corpus
// ---------------------------------------------------------------------------

const STAGE_TEXTS: [&str; 5] =
    ["Sleep stage W", "Sleep stage 1", "Sleep stage 2", "Sleep stage 3", "Sleep stage R"];

/// Writes one patient-night: a two-channel PSG whose per-epoch mean encodes
/// the stage, plus the matching hypnogram.
fn write_smoke_recording(dir: &Path, patient: u32, classes: &[usize]) {
    let n_epochs = classes.len();
    let labels = Approach::Dual.channel_labels();
    let specs: Vec<SignalSpec> = labels
        .iter()
        .map(|&label| SignalSpec {
            label: label.to_string(),
            transducer: String::new(),
            physical_dimension: "uV".into(),
            physical_min: -250.0,
            physical_max: 250.0,
            digital_min: -2048,
            digital_max: 2047,
            prefiltering: String::new(),
            samples_per_record: SEGMENT_SAMPLES,
            reserved: String::new(),
        })
        .collect();
    let data: Vec<Vec<f64>> = (0..labels.len())
        .map(|ch| {
            let phase = patient as f64 + ch as f64 * 0.5;
            (0..n_epochs * SEGMENT_SAMPLES)
                .map(|i| {
                    let class = classes[i / SEGMENT_SAMPLES];
                    (class as f64 - 2.0) * 30.0 + 3.0 * (0.07 * i as f64 + phase).sin()
                })
                .collect()
        })
        .collect();

    let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap().and_hms_opt(22, 0, 0).unwrap();
    let mut header = EdfHeader {
        version: "0".into(),
        patient_info: format!("P{patient:02}"),
        recording_info: "Startdate smoke".into(),
        start_datetime: start,
        header_bytes: 256 * (1 + specs.len()),
        reserved: "EDF+C".into(),
        n_data_records: n_epochs as i64,
        record_duration: 30.0,
        n_signals: specs.len(),
    };
    let psg = write_synthetic_edf(&header, &specs, &data, &[]).unwrap();
    std::fs::write(dir.join(format!("SC4{patient:02}1E0-PSG.edf")), psg).unwrap();

    let events: Vec<AnnotationEvent> = classes
        .iter()
        .enumerate()
        .map(|(e, &class)| AnnotationEvent {
            onset_seconds: 30.0 * e as f64,
            duration_seconds: 30.0,
            text: STAGE_TEXTS[class].to_string(),
        })
        .collect();
    header.n_signals = 1;
    header.header_bytes = 512;
    let hyp = write_synthetic_edf(&header, &[], &[], &events).unwrap();
    std::fs::write(dir.join(format!("SC4{patient:02}1EC-Hypnogram.edf")), hyp).unwrap();
}

fn model_input(segment: &Segment, rows: &[usize]) -> Tensor {
    let data = segment.samples.data();
    let mut out = Vec::with_capacity(rows.len() * SEGMENT_SAMPLES);
    for &r in rows {
        out.extend_from_slice(&data[r * SEGMENT_SAMPLES..(r + 1) * SEGMENT_SAMPLES]);
    }
    Tensor::new(vec![rows.len(), SEGMENT_SAMPLES], out).unwrap()
}

fn split_accuracy(
    model: &ModelParams,
    segments: &[Segment],
    indices: &[usize],
    rows: &[usize],
) -> f64 {
    let hits = indices
        .iter()
        .filter(|&&i| {
            let (pred, _) = model.predict(&model_input(&segments[i], rows)).unwrap();
            pred == segments[i].label.class_index().unwrap()
        })
        .count();
    hits as f64 / indices.len() as f64
}

fn majority_fraction(segments: &[Segment], indices: &[usize]) -> f64 {
    let mut tally = [0usize; 5];
    for &i in indices {
        tally[segments[i].label.class_index().unwrap()] += 1;
    }
    *tally.iter().max().unwrap() as f64 / indices.len() as f64
}

#[test]
fn acceptance_09_training_smoke() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let classes: Vec<usize> = (0..25).map(|i| i % 5).collect();
    for patient in 1..=2u32 {
        write_smoke_recording(dir.path(), patient, &classes);
    }

    let (labels, segments, summary) =
        prepare_dataset(dir.path(), StandardizeMode::PerRecordingZscore).unwrap();
    assert_eq!(segments.len(), 50);
    assert!(segments.len() <= 200);
    assert_eq!(summary.class_counts, [10; 5]);

    let folds = leave_one_out_folds(&segments, 7, 0.1).unwrap();
    assert_eq!(folds.len(), 2);
    let fold = &folds[0];

    // A tiny corpus needs more passes and smaller batches than the protocol
    // defaults to accumulate a comparable number of optimizer steps.
    let mut config = TrainConfig::new(Approach::FpzCz);
    config.learning_rate = 0.003;
    config.batch_size = 5;
    config.max_epochs = 100;
    config.patience = 100;
    config.seed = 23;
    let (model, history) = train_fold(&segments, &labels, fold, &config).unwrap();

    let rows = Approach::FpzCz.channel_indices(&labels).unwrap();
    let train_acc = split_accuracy(&model, &segments, &fold.train, &rows);
    assert!(train_acc >= 0.99, "training accuracy {train_acc} after {} epochs", history.epochs.len());

    let test_segments: Vec<Segment> = fold.test.iter().map(|&i| segments[i].clone()).collect();
    let row =
        evaluate_single(&model, Approach::FpzCz, &test_segments, &labels, fold.fold_id)
            .unwrap()
            .row();
    let baseline = majority_fraction(&segments, &fold.test);
    assert!(
        row.accuracy > baseline,
        "held-out accuracy {:.4} does not beat the majority baseline {baseline:.4}",
        row.accuracy
    );

    // Same seed, same data: training must be bit-for-bit repeatable.
    let (model2, history2) = train_fold(&segments, &labels, fold, &config).unwrap();
    assert_eq!(model, model2);
    assert_eq!(history, history2);

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(300), "smoke test took {elapsed:?}, budget is 5 min");
    println!("acceptance 9 (synthetic training smoke: fit, generalization, determinism): PASS");
}

// ---------------------------------------------------------------------------
// 10. Real-corpus run, gated on SLEEP_EDF_DIR
// ---------------------------------------------------------------------------

#[test]
fn acceptance_10_real_corpus_two_patients() {
    let Some(dir) = std::env::var_os("SLEEP_EDF_DIR") else {
        println!("acceptance 10 (two-patient run on the real corpus): SKIP (SLEEP_EDF_DIR not set)");
        return;
    };
    let dir = PathBuf::from(dir);
    let scan = scan_corpus(&dir).unwrap();

    // First night of the first two patients.
    let mut seen = BTreeSet::new();
    let chosen: Vec<_> = scan
        .recordings
        .iter()
        .filter(|r| r.hypnogram.is_some() && seen.insert(r.patient_id))
        .take(2)
        .collect();
    assert_eq!(chosen.len(), 2, "the corpus provides at least two scored patients");

    let labels: Vec<String> =
        Approach::Dual.channel_labels().iter().map(|s| s.to_string()).collect();
    let mut segments = Vec::new();
    for files in chosen {
        let rec = load_recording(files).unwrap();
        let cut = segment_recording(&rec, Approach::Dual.channel_labels()).unwrap();
        segments.extend(cut.segments.into_iter().filter(|s| s.label.class_index().is_some()));
    }
    standardize(&mut segments, StandardizeMode::PerRecordingZscore).unwrap();

    let folds = leave_one_out_folds(&segments, 31, 0.1).unwrap();
    let fold = &folds[0];

    let mut config = TrainConfig::new(Approach::Dual);
    config.max_epochs = 10; // at most ten passes over the training patient
    config.patience = 10;
    config.seed = 31;
    let (model, history) = train_fold(&segments, &labels, fold, &config).unwrap();

    let test_segments: Vec<Segment> = fold.test.iter().map(|&i| segments[i].clone()).collect();
    let row = evaluate_single(&model, Approach::Dual, &test_segments, &labels, fold.fold_id)
        .unwrap()
        .row();
    let baseline = majority_fraction(&segments, &fold.test);
    assert!(
        row.accuracy > baseline,
        "test accuracy {:.4} does not beat the majority baseline {baseline:.4}",
        row.accuracy
    );
    println!(
        "acceptance 10 (two-patient run on the real corpus): PASS (accuracy {:.4} > baseline {:.4} after {} epochs)",
        row.accuracy,
        baseline,
        history.epochs.len()
    );
}
