use super::EvalError;

/// Mean absolute difference of two equally long, non-empty sequences.
///
/// ```
/// let m = racecrt::mae(&[0.1, 0.3], &[0.2, 0.2])?;
/// assert!((m - 0.1).abs() < 1e-15);
/// # Ok::<(), racecrt::EvalError>(())
/// ```
pub fn mae(predictions: &[f64], truths: &[f64]) -> Result<f64, EvalError> {
    if predictions.len() != truths.len() {
        return Err(EvalError::ArityMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let total: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t).abs()).sum();
    Ok(total / predictions.len() as f64)
}

/// Sample standard deviation (`n - 1` denominator); 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
