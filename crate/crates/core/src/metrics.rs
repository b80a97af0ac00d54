//! Evaluation metrics and the parameter-efficiency audit.
//!
//! Regression quality is reported as MSE, MAE and the coefficient of
//! determination; classification quality as macro-averaged F1. Parameter
//! efficiency eta = M / P normalizes a performance figure M (in percent) by
//! the trainable-parameter count P, so architectures of very different sizes
//! compare on performance delivered per weight.

use crate::error::MetricError;
use crate::tensor::Tensor;

fn check_pair(metric: &'static str, y: &[f64], yhat: &[f64]) -> Result<(), MetricError> {
    if y.is_empty() || yhat.is_empty() {
        return Err(MetricError::EmptyInput { metric });
    }
    if y.len() != yhat.len() {
        return Err(MetricError::LengthMismatch {
            metric,
            left: y.len(),
            right: yhat.len(),
        });
    }
    Ok(())
}

/// Mean squared deviation between targets and predictions.
pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check_pair("mse", y, yhat)?;
    let sum: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / y.len() as f64)
}

/// Mean absolute deviation between targets and predictions.
pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check_pair("mae", y, yhat)?;
    let sum: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / y.len() as f64)
}

/// Coefficient of determination, 1 - SS_res / SS_tot.
///
/// Requires at least two observations and a non-constant target; a constant
/// target makes SS_tot zero and the score undefined.
pub fn r2_score(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check_pair("r2_score", y, yhat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    if y.len() < 2 || ss_tot == 0.0 {
        return Err(MetricError::DegenerateTarget);
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Macro-averaged F1: the unweighted mean of per-class F1 scores.
///
/// A class that never occurs — no true positives, false positives or false
/// negatives — contributes an F1 of zero rather than being skipped, so the
/// score stays comparable across runs that miss different classes.
pub fn f1_macro(labels: &[usize], preds: &[usize], num_classes: usize) -> Result<f64, MetricError> {
    if labels.is_empty() || num_classes == 0 {
        return Err(MetricError::EmptyInput { metric: "f1_macro" });
    }
    if labels.len() != preds.len() {
        return Err(MetricError::LengthMismatch {
            metric: "f1_macro",
            left: labels.len(),
            right: preds.len(),
        });
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fneg = vec![0usize; num_classes];
    for (&l, &p) in labels.iter().zip(preds) {
        for id in [l, p] {
            if id >= num_classes {
                return Err(MetricError::BadClassId { id, num_classes });
            }
        }
        if l == p {
            tp[l] += 1;
        } else {
            fp[p] += 1;
            fneg[l] += 1;
        }
    }
    let f1_sum: f64 = (0..num_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fneg[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(f1_sum / num_classes as f64)
}

/// Negative log-softmax of the true class, stabilized by max subtraction.
pub fn cross_entropy(logits: &Tensor, true_class: usize) -> Result<f64, MetricError> {
    let k = logits.numel();
    if k == 0 {
        return Err(MetricError::EmptyInput {
            metric: "cross_entropy",
        });
    }
    if true_class >= k {
        return Err(MetricError::BadClassId {
            id: true_class,
            num_classes: k,
        });
    }
    let data = logits.data();
    let max = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + data.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    Ok(lse - data[true_class])
}

/// Parameter efficiency eta = M / P for a performance figure M in percent
/// and a trainable-parameter count P.
pub fn parameter_efficiency(metric_pct: f64, params: usize) -> Result<f64, MetricError> {
    if params == 0 {
        return Err(MetricError::NonPositiveParams);
    }
    Ok(metric_pct / params as f64)
}

/// One row of the bundled reference comparison: a model's reported
/// performance (percent), its trainable-parameter count, and the efficiency
/// figure the comparison quotes, at the decimal precision it was quoted with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyRow {
    pub dataset: &'static str,
    pub model: &'static str,
    /// R^2 for the regression datasets, F1 for the classification ones.
    pub metric_pct: f64,
    pub params: usize,
    pub quoted: f64,
    /// Decimal places the quoted figure carries.
    pub decimals: u32,
}

/// Reference comparison grid: five datasets by five architectures.
pub const REFERENCE_COMPARISONS: &[EfficiencyRow] = &[
    EfficiencyRow { dataset: "S&P 500", model: "CURA", metric_pct: 99.0, params: 746, quoted: 0.130, decimals: 3 },
    EfficiencyRow { dataset: "S&P 500", model: "gMLP", metric_pct: 99.0, params: 1067, quoted: 0.092, decimals: 3 },
    EfficiencyRow { dataset: "S&P 500", model: "GRU", metric_pct: 97.0, params: 4478, quoted: 0.021, decimals: 3 },
    EfficiencyRow { dataset: "S&P 500", model: "LSTM", metric_pct: 98.0, params: 4513, quoted: 0.021, decimals: 3 },
    EfficiencyRow { dataset: "S&P 500", model: "TSMixer", metric_pct: 99.5, params: 3585, quoted: 0.027, decimals: 3 },
    EfficiencyRow { dataset: "House Prices", model: "CURA", metric_pct: 84.0, params: 790, quoted: 0.10, decimals: 2 },
    EfficiencyRow { dataset: "House Prices", model: "gMLP", metric_pct: 79.0, params: 929, quoted: 0.085, decimals: 3 },
    EfficiencyRow { dataset: "House Prices", model: "GRU", metric_pct: -0.12, params: 154_561, quoted: -7.76, decimals: 2 },
    EfficiencyRow { dataset: "House Prices", model: "LSTM", metric_pct: 21.0, params: 1285, quoted: 0.016, decimals: 3 },
    EfficiencyRow { dataset: "House Prices", model: "TSMixer", metric_pct: 71.0, params: 11_475, quoted: 0.0061, decimals: 4 },
    EfficiencyRow { dataset: "ETTm1", model: "CURA", metric_pct: 86.45, params: 731, quoted: 0.12, decimals: 2 },
    EfficiencyRow { dataset: "ETTm1", model: "gMLP", metric_pct: 80.88, params: 11_423, quoted: 0.0070, decimals: 4 },
    EfficiencyRow { dataset: "ETTm1", model: "GRU", metric_pct: 53.70, params: 14_081, quoted: 0.0038, decimals: 4 },
    EfficiencyRow { dataset: "ETTm1", model: "LSTM", metric_pct: 44.46, params: 18_753, quoted: 0.0023, decimals: 4 },
    EfficiencyRow { dataset: "ETTm1", model: "TSMixer", metric_pct: 91.15, params: 55_090, quoted: 0.0016, decimals: 4 },
    EfficiencyRow { dataset: "UCI HAR", model: "CURA", metric_pct: 95.40, params: 2342, quoted: 0.041, decimals: 3 },
    EfficiencyRow { dataset: "UCI HAR", model: "gMLP", metric_pct: 94.96, params: 2374, quoted: 0.040, decimals: 3 },
    EfficiencyRow { dataset: "UCI HAR", model: "GRU", metric_pct: 93.16, params: 15_174, quoted: 0.0064, decimals: 4 },
    EfficiencyRow { dataset: "UCI HAR", model: "LSTM", metric_pct: 93.71, params: 20_102, quoted: 0.0046, decimals: 4 },
    EfficiencyRow { dataset: "UCI HAR", model: "TSMixer", metric_pct: 95.63, params: 14_490, quoted: 0.0065, decimals: 4 },
    EfficiencyRow { dataset: "FallAllD", model: "CURA", metric_pct: 80.0, params: 345, quoted: 0.231, decimals: 3 },
    EfficiencyRow { dataset: "FallAllD", model: "gMLP", metric_pct: 79.3, params: 440_551, quoted: 0.00018, decimals: 5 },
    EfficiencyRow { dataset: "FallAllD", model: "GRU", metric_pct: 77.5, params: 7681, quoted: 0.01, decimals: 2 },
    EfficiencyRow { dataset: "FallAllD", model: "LSTM", metric_pct: 77.3, params: 4769, quoted: 0.016, decimals: 3 },
    EfficiencyRow { dataset: "FallAllD", model: "TSMixer", metric_pct: 76.1, params: 836_571, quoted: 0.000091, decimals: 6 },
];

/// Outcome of recomputing one reference row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyAudit {
    pub row: EfficiencyRow,
    /// eta recomputed from the row's performance and parameter count.
    pub exact: f64,
    /// 10^-decimals: the slack a correctly rounded quote may sit inside.
    pub tolerance: f64,
    /// Whether the quoted figure agrees with the recomputation.
    pub consistent: bool,
}

/// Recompute eta = M / P for every reference row and flag quotes that do
/// not agree with the recomputation at their own printed precision.
///
/// A row is consistent when |exact - quoted| <= 10^-decimals; anything
/// farther off cannot be a rounding of the exact value.
pub fn audit_reference_efficiency() -> Vec<EfficiencyAudit> {
    REFERENCE_COMPARISONS
        .iter()
        .map(|&row| {
            let exact = parameter_efficiency(row.metric_pct, row.params)
                .expect("reference rows have positive parameter counts");
            let tolerance = 10f64.powi(-(row.decimals as i32));
            EfficiencyAudit {
                row,
                exact,
                tolerance,
                consistent: (exact - row.quoted).abs() <= tolerance,
            }
        })
        .collect()
}
