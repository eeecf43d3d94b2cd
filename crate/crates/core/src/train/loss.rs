use crate::error::{Error, Result};
use crate::layers::{log_softmax, softmax};
use crate::tensor::{Scalar, Tensor};

fn check_labels<T: Scalar>(rows: &Tensor<T>, labels: &[usize]) -> Result<(usize, usize)> {
    let d = rows.dims();
    if d.len() != 2 {
        return Err(Error::InvalidShape(format!("expected [N, K], got {}", rows.shape())));
    }
    let (n, k) = (d[0], d[1]);
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            what: "rows vs labels",
            left: n,
            right: labels.len(),
        });
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
        return Err(Error::LabelOutOfRange {
            index,
            label,
            classes: k,
        });
    }
    Ok((n, k))
}

fn logit_gradient<T: Scalar>(probs: Tensor<T>, labels: &[usize], k: usize) -> Tensor<T> {
    let inv_n = T::from_f64(1.0 / labels.len() as f64);
    let mut grad = probs;
    for (row, &label) in grad.data_mut().chunks_mut(k).zip(labels) {
        row[label] -= T::one();
        for g in row.iter_mut() {
            *g *= inv_n;
        }
    }
    grad
}

/// Mean sparse categorical cross-entropy of probability rows, and its
/// gradient with respect to the logits that produced them, `(p - onehot) / N`.
///
/// Probabilities are clamped away from zero before the log.
pub fn sparse_ce_loss<T: Scalar>(probabilities: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>)> {
    let (_, k) = check_labels(probabilities, labels)?;
    let total: f64 = probabilities
        .data()
        .chunks(k)
        .zip(labels)
        .map(|(row, &l)| -row[l].to_f64().max(f64::MIN_POSITIVE).ln())
        .sum();
    let loss = total / labels.len() as f64;
    Ok((loss, logit_gradient(probabilities.clone(), labels, k)))
}

/// Same loss computed from logits through log-softmax, for numerical stability.
pub fn sparse_ce_from_logits<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>)> {
    let (_, k) = check_labels(logits, labels)?;
    let logp = log_softmax(logits)?;
    let total: f64 = logp
        .data()
        .chunks(k)
        .zip(labels)
        .map(|(row, &l)| -row[l].to_f64())
        .sum();
    let loss = total / labels.len() as f64;
    Ok((loss, logit_gradient(softmax(logits)?, labels, k)))
}
