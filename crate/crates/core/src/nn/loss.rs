use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean softmax cross-entropy over the batch and its gradient with respect
/// to the logits.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (k, classes) = match logits.shape() {
        &[k, c] => (k, c),
        s => return Err(Error::shape("cross_entropy", format!("logits must be [K, C], got {s:?}"))),
    };
    if labels.len() != k {
        return Err(Error::shape(
            "cross_entropy",
            format!("{k} logit rows but {} labels", labels.len()),
        ));
    }
    if k == 0 {
        return Err(Error::invalid("cross_entropy on an empty batch"));
    }
    let mut grad = vec![0.0; k * classes];
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::invalid(format!("label {label} out of range for {classes} classes")));
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[label];
        let g = &mut grad[r * classes..(r + 1) * classes];
        for (gi, v) in g.iter_mut().zip(row) {
            *gi = (v - log_z).exp() / k as f64;
        }
        g[label] -= 1.0 / k as f64;
    }
    Ok((total / k as f64, Tensor::new(vec![k, classes], grad)?))
}

/// Row-wise argmax of the logits.
pub fn predictions(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (i, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy(logits: &Tensor, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions(logits).iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}
