use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::real::Real;

/// Added inside the logarithm of the cross-entropy.
pub const LOG_EPSILON: f64 = 1e-12;

/// Numerically stable softmax: logits are shifted by their maximum first.
pub fn softmax<F: Real>(logits: ArrayView1<'_, F>) -> Array1<F> {
    let max = logits.fold(F::neg_infinity(), |m, &v| m.max(v));
    let mut e = logits.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e.mapv_inplace(|v| v / sum);
    e
}

pub fn softmax_rows<F: Real>(logits: ArrayView2<'_, F>) -> Array2<F> {
    let mut out = logits.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let p = softmax(row.view());
        row.assign(&p);
    }
    out
}

/// Mean over the batch of `-w[t_n] * ln(p[n, t_n] + eps)`, where `t_n` is the
/// target class of row `n`.
pub fn weighted_cross_entropy<F: Real>(
    probs: ArrayView2<'_, F>,
    targets: &[usize],
    weights: &[F],
) -> F {
    assert_eq!(probs.nrows(), targets.len());
    let eps = F::lit(LOG_EPSILON);
    let total: F = targets
        .iter()
        .enumerate()
        .map(|(n, &t)| -weights[t] * (probs[[n, t]] + eps).ln())
        .sum();
    total / F::lit(targets.len() as f64)
}

/// Gradient of [`weighted_cross_entropy`] with respect to the logits that
/// produced `probs` via softmax: `w[t_n] * (p_n - onehot(t_n)) / B`.
/// Exact for `eps = 0`; the epsilon only guards the logarithm.
pub fn softmax_cross_entropy_grad<F: Real>(
    probs: ArrayView2<'_, F>,
    targets: &[usize],
    weights: &[F],
) -> Array2<F> {
    let scale = F::one() / F::lit(targets.len() as f64);
    let mut grad = probs.to_owned();
    for (mut row, &t) in grad.axis_iter_mut(Axis(0)).zip(targets) {
        row[t] -= F::one();
        let w = weights[t] * scale;
        row.mapv_inplace(|v| v * w);
    }
    grad
}
