//! Small numeric helpers shared by the sequence models.

/// Macro-averaged F-score over the four step labels, from a confusion count
/// matrix indexed `[gold][predicted]`. Empty denominators contribute 0.
pub fn macro_f_from_counts(counts: &[[usize; 4]; 4]) -> f64 {
    let mut total = 0.0;
    for class in 0..4 {
        let tp = counts[class][class] as f64;
        let gold: usize = counts[class].iter().sum();
        let predicted: usize = counts.iter().map(|row| row[class]).sum();
        let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let recall = if gold > 0 { tp / gold as f64 } else { 0.0 };
        let f = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        total += f;
    }
    total / 4.0
}

/// Numerically stable log(sum(exp(xs))). Returns -inf for an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}
