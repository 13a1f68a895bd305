//! Accuracy and macro F1 over a fixed class list.

use super::{ExperienceError, Result};

fn check_lengths<T>(preds: &[T], labels: &[T]) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(ExperienceError::LengthMismatch {
            preds: preds.len(),
            labels: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(ExperienceError::EmptyInput);
    }
    Ok(())
}

/// `correct / total`.
pub fn accuracy<T: PartialEq>(preds: &[T], labels: &[T]) -> Result<f64> {
    check_lengths(preds, labels)?;
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// F1 of one class from its confusion counts. Precision or recall with a zero
/// denominator counts as 0, and so does F1 when `P + R = 0`. Computed as
/// `2tp / (2tp + fp + fn)`, which equals `2PR / (P + R)` under those
/// conventions and rounds once.
pub fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
}

/// Per-class F1 in the order of `classes`.
pub fn per_class_f1<T: PartialEq>(preds: &[T], labels: &[T], classes: &[T]) -> Result<Vec<f64>> {
    check_lengths(preds, labels)?;
    Ok(classes
        .iter()
        .map(|c| {
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for (p, l) in preds.iter().zip(labels) {
                match (p == c, l == c) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
            f1_from_counts(tp, fp, fn_)
        })
        .collect())
}

/// Unweighted mean of per-class F1 over `classes`. A class absent from both
/// predictions and labels still contributes 0.
pub fn macro_f1<T: PartialEq>(preds: &[T], labels: &[T], classes: &[T]) -> Result<f64> {
    let f1 = per_class_f1(preds, labels, classes)?;
    Ok(f1.iter().sum::<f64>() / f1.len() as f64)
}
