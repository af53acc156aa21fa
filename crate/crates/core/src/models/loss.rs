//! Loss functions: mean-squared error for regression, cross-entropy (from
//! logits, max-subtraction stabilized) for classification.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Numerically stable softmax of one logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Mean squared error between two equal-length vectors.
pub fn mse_loss(prediction: &[f64], target: &[f64]) -> Result<f64> {
    if prediction.len() != target.len() || prediction.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "mse over {} predictions vs {} targets",
            prediction.len(),
            target.len()
        )));
    }
    Ok(prediction
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / prediction.len() as f64)
}

/// Cross-entropy of one logit vector against a class index.
pub fn cross_entropy_loss(logits: &[f64], class: usize) -> Result<f64> {
    if class >= logits.len() {
        return Err(Error::Label(format!(
            "class index {class} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    Ok(log_sum - (logits[class] - max))
}

/// Batch MSE and its gradient w.r.t. predictions (mean over all elements).
pub(crate) fn mse_batch(pred: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "prediction shape {:?} vs target shape {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = (pred.len()) as f64;
    let diff = pred - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.mapv(|d| 2.0 * d / n);
    Ok((loss, grad))
}

/// Batch cross-entropy from logits and its gradient (mean over the batch).
pub(crate) fn cross_entropy_batch(
    logits: &Array2<f64>,
    classes: &[usize],
) -> Result<(f64, Array2<f64>)> {
    let (batch, n_classes) = logits.dim();
    if classes.len() != batch {
        return Err(Error::ShapeMismatch(format!(
            "{batch} logit rows vs {} labels",
            classes.len()
        )));
    }
    let mut grad = Array2::zeros((batch, n_classes));
    let mut total = 0.0;
    for (i, (row, &class)) in logits.outer_iter().zip(classes).enumerate() {
        if class >= n_classes {
            return Err(Error::Label(format!(
                "class index {class} out of range for {n_classes} classes"
            )));
        }
        let row = row.as_slice().unwrap();
        let probs = softmax(row);
        total += cross_entropy_loss(row, class)?;
        for (j, &p) in probs.iter().enumerate() {
            grad[[i, j]] = (p - if j == class { 1.0 } else { 0.0 }) / batch as f64;
        }
    }
    Ok((total / batch as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mse_of_equal_vectors_is_zero() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn mse_of_3_vs_1_is_4() {
        assert_eq!(mse_loss(&[3.0], &[1.0]).unwrap(), 4.0);
    }

    #[test]
    fn uniform_16_class_cross_entropy_is_ln_16() {
        let logits = vec![0.0; 16];
        for class in [0, 7, 15] {
            let ce = cross_entropy_loss(&logits, class).unwrap();
            assert!((ce - (16.0f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_class_is_a_label_error() {
        assert!(matches!(
            cross_entropy_loss(&[0.0; 4], 4),
            Err(crate::error::Error::Label(_))
        ));
    }

    #[test]
    fn softmax_is_stable_for_huge_logits() {
        let probs = softmax(&[1e4, -1e4, 0.0, 5e3]);
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(
            logits in proptest::collection::vec(-1e4f64..1e4, 2..24),
        ) {
            let probs = softmax(&logits);
            let sum: f64 = probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            // Entries can underflow to exactly 0 for extreme logit gaps.
            prop_assert!(probs.iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p)));
        }

        #[test]
        fn cross_entropy_is_nonnegative(
            logits in proptest::collection::vec(-50.0f64..50.0, 2..16),
            class_pick in 0usize..16,
        ) {
            let class = class_pick % logits.len();
            let ce = cross_entropy_loss(&logits, class).unwrap();
            prop_assert!(ce >= -1e-12);
        }
    }
}
