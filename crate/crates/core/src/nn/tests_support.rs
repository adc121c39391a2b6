//! Shared helpers for the unit tests in this module tree.

use super::{Activation, Conv1d, Tensor};
use crate::rng::SeededRng;
use rand::Rng;

/// Absolute closeness assertion with a readable failure message.
pub fn assert_close(got: f64, want: f64, tol: f64) {
    assert!(
        (got - want).abs() <= tol,
        "got {got}, want {want} (|diff| = {} > {tol})",
        (got - want).abs()
    );
}

/// Gradient closeness: relative error against the larger magnitude, with an
/// absolute floor so near-zero pairs compare sensibly.
pub fn assert_grad_close(analytic: f64, numeric: f64, tol: f64) {
    let denom = analytic.abs().max(numeric.abs());
    if denom < 1e-6 {
        assert!(
            (analytic - numeric).abs() <= 1e-6,
            "near-zero gradient mismatch: analytic {analytic}, numeric {numeric}"
        );
    } else {
        let rel = (analytic - numeric).abs() / denom;
        assert!(
            rel <= tol,
            "gradient mismatch: analytic {analytic}, numeric {numeric}, rel {rel} > {tol}"
        );
    }
}

/// Central-difference check that retries with smaller steps.
///
/// A ReLU or pool-tie kink inside the `+/-h` interval contaminates the
/// quotient; shrinking `h` moves the interval off the kink, while a genuine
/// gradient bug keeps the mismatch constant. Passing at any step size
/// therefore confirms the analytic value.
pub fn assert_fd_adaptive(mut loss_at: impl FnMut(f64) -> f64, analytic: f64, tol: f64) {
    let mut best = f64::INFINITY;
    for &h in &[1e-5, 1e-6, 1e-7] {
        let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
        let denom = analytic.abs().max(numeric.abs());
        if denom < 1e-6 {
            if (analytic - numeric).abs() <= 1e-6 {
                return;
            }
            best = best.min((analytic - numeric).abs());
        } else {
            let rel = (analytic - numeric).abs() / denom;
            if rel <= tol {
                return;
            }
            best = best.min(rel);
        }
    }
    panic!("gradient mismatch persists across step sizes: analytic {analytic}, best error {best} > {tol}");
}

/// Samples an input whose pre-activations stay clear of the ReLU kink, so
/// central differences see a locally linear function.
pub fn margin_input(conv: &Conv1d, len: usize, rng: &mut SeededRng, margin: f64) -> Tensor {
    let ci = conv.in_channels();
    let linear = Conv1d {
        kernel: conv.kernel.clone(),
        bias: conv.bias.clone(),
        activation: Activation::Linear,
    };
    for _ in 0..1000 {
        let x = Tensor::new(
            vec![ci, len],
            (0..ci * len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let z = linear.forward(&x).unwrap();
        if z.data().iter().all(|v| v.abs() >= margin) {
            return x;
        }
    }
    panic!("could not sample an input with pre-activation margin {margin}");
}

/// Central-difference check of every conv gradient (input, kernel, bias)
/// against the analytic backward pass, under a fixed random projection loss.
pub fn fd_check_conv(conv: &Conv1d, x: &Tensor, rng: &mut SeededRng, h: f64, tol: f64) {
    let y = conv.forward(x).unwrap();
    let proj: Vec<f64> = (0..y.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let dy = Tensor::new(y.shape().to_vec(), proj.clone()).unwrap();
    let g = conv.backward(x, &y, &dy).unwrap();

    let loss = |c: &Conv1d, x: &Tensor| -> f64 {
        c.forward(x)
            .unwrap()
            .data()
            .iter()
            .zip(&proj)
            .map(|(a, b)| a * b)
            .sum()
    };

    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += h;
        let mut xm = x.clone();
        xm.data_mut()[i] -= h;
        let n = (loss(conv, &xp) - loss(conv, &xm)) / (2.0 * h);
        assert_grad_close(g.input.data()[i], n, tol);
    }
    for i in 0..conv.kernel.len() {
        let mut cp = conv.clone();
        cp.kernel.data_mut()[i] += h;
        let mut cm = conv.clone();
        cm.kernel.data_mut()[i] -= h;
        let n = (loss(&cp, x) - loss(&cm, x)) / (2.0 * h);
        assert_grad_close(g.kernel.data()[i], n, tol);
    }
    for i in 0..conv.bias.len() {
        let mut cp = conv.clone();
        cp.bias.data_mut()[i] += h;
        let mut cm = conv.clone();
        cm.bias.data_mut()[i] -= h;
        let n = (loss(&cp, x) - loss(&cm, x)) / (2.0 * h);
        assert_grad_close(g.bias.data()[i], n, tol);
    }
}
