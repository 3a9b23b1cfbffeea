use ndarray::ArrayView1;

/// Probabilities are floored here before taking the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-ln p[label]` with the probability floored at [`PROB_FLOOR`].
pub fn cross_entropy(probs: ArrayView1<f64>, label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

/// Mean cross-entropy over a batch of distributions.
pub fn mean_cross_entropy<'a>(
    probs: impl IntoIterator<Item = ArrayView1<'a, f64>>,
    labels: &[usize],
) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for (p, &y) in probs.into_iter().zip(labels) {
        total += cross_entropy(p, y);
        n += 1;
    }
    if n == 0 { 0.0 } else { total / n as f64 }
}
