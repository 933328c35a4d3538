//! Mean-square error measures: empirical (on the experimental design),
//! generalization (on a validation set), and conditional generalization
//! (restricted to validation points whose exact response exceeds a
//! threshold). Relative errors are normalized by the empirical variance of
//! the corresponding response set, with the 1/(N−1) convention.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Conditional errors on fewer points than this are refused by default;
/// tail estimates on tiny subsets have exploding variance.
pub const DEFAULT_MIN_CONDITIONAL_SUBSET: usize = 30;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("response sets must be non-empty and equally sized")]
    BadShape,
    #[error("response variance is zero; relative error undefined")]
    ZeroVariance,
    #[error("conditional subset has {size} points, need at least {min}")]
    SubsetTooSmall { size: usize, min: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Empirical,
    Generalization,
    Conditional,
}

/// A mean-square error with its relative (variance-normalized) companion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Mean of squared residuals, in squared response units.
    pub absolute: f64,
    /// Absolute error divided by the empirical variance of the reference
    /// responses.
    pub relative: f64,
    pub sample_count: usize,
    pub kind: ErrorKind,
    /// Response threshold, present for conditional errors only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
}

/// Unbiased (1/(N−1)) empirical variance.
pub fn empirical_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
}

fn mean_square_error(predicted: &[f64], actual: &[f64]) -> f64 {
    predicted
        .iter()
        .zip(actual.iter())
        .map(|(p, a)| (a - p) * (a - p))
        .sum::<f64>()
        / actual.len() as f64
}

fn report(
    predicted: &[f64],
    actual: &[f64],
    kind: ErrorKind,
    threshold: Option<f64>,
) -> Result<ErrorReport, MetricsError> {
    if predicted.is_empty() || predicted.len() != actual.len() {
        return Err(MetricsError::BadShape);
    }
    let absolute = mean_square_error(predicted, actual);
    let var = empirical_variance(actual);
    if var <= 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(ErrorReport {
        absolute,
        relative: absolute / var,
        sample_count: actual.len(),
        kind,
        threshold,
    })
}

/// Mean-square residual over the experimental design.
pub fn empirical_error(predicted: &[f64], actual: &[f64]) -> Result<ErrorReport, MetricsError> {
    report(predicted, actual, ErrorKind::Empirical, None)
}

/// Mean-square residual over an independent validation set.
pub fn generalization_error(
    predicted: &[f64],
    actual: &[f64],
) -> Result<ErrorReport, MetricsError> {
    report(predicted, actual, ErrorKind::Generalization, None)
}

/// Generalization error restricted to the validation points whose exact
/// response is at least `y_lim`; the relative error is normalized by the
/// empirical variance of the subset responses.
pub fn conditional_generalization_error(
    predicted: &[f64],
    actual: &[f64],
    y_lim: f64,
    min_subset: usize,
) -> Result<ErrorReport, MetricsError> {
    if predicted.is_empty() || predicted.len() != actual.len() {
        return Err(MetricsError::BadShape);
    }
    let mut sub_pred = Vec::new();
    let mut sub_actual = Vec::new();
    for (p, a) in predicted.iter().zip(actual.iter()) {
        if *a >= y_lim {
            sub_pred.push(*p);
            sub_actual.push(*a);
        }
    }
    if sub_actual.len() < min_subset.max(2) {
        return Err(MetricsError::SubsetTooSmall {
            size: sub_actual.len(),
            min: min_subset.max(2),
        });
    }
    report(
        &sub_pred,
        &sub_actual,
        ErrorKind::Conditional,
        Some(y_lim),
    )
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn response_quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = q.clamp(0.0, 1.0);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}
