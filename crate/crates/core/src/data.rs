//! Time-series ingestion, normalization, windowing and splitting.
//!
//! The pipeline functions keep one hard rule: every statistic is fitted on
//! training rows only, and the chronological split happens before any test
//! row can influence a fitted quantity. Normalization is z-score with
//! population (denominator-N) standard deviation and an exact inverse.

use std::path::Path;

use crate::error::DataError;
use crate::tensor::Tensor;

/// A finite multivariate series: N rows in temporal order, C named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    names: Vec<String>,
    values: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Series {
    /// Build from named columns and row-major values; every value must be
    /// finite and the value count must tile the column count.
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Series, DataError> {
        let cols = names.len();
        if cols == 0 {
            return Err(DataError::Invalid {
                why: "a series needs at least one column".to_string(),
            });
        }
        if values.is_empty() || values.len() % cols != 0 {
            return Err(DataError::Invalid {
                why: format!(
                    "{} values do not tile {} columns into whole rows",
                    values.len(),
                    cols
                ),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Invalid {
                why: format!("non-finite value at row {}, column {}", pos / cols, pos % cols),
            });
        }
        let rows = values.len() / cols;
        Ok(Series {
            names,
            values,
            rows,
            cols,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Per-column z-score map with its exact inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Normalizer {
    /// The do-nothing map: mean 0, scale 1 for every column.
    pub fn identity(cols: usize) -> Normalizer {
        Normalizer {
            mean: vec![0.0; cols],
            std: vec![1.0; cols],
        }
    }

    pub fn cols(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self, col: usize) -> f64 {
        self.mean[col]
    }

    pub fn std(&self, col: usize) -> f64 {
        self.std[col]
    }

    pub fn apply_value(&self, col: usize, v: f64) -> f64 {
        (v - self.mean[col]) / self.std[col]
    }

    pub fn invert_value(&self, col: usize, v: f64) -> f64 {
        v * self.std[col] + self.mean[col]
    }

    /// Rebuild a normalizer from previously fitted statistics (e.g. read back
    /// from a model file). Scales must be positive so the map stays invertible.
    pub fn from_stats(mean: Vec<f64>, std: Vec<f64>) -> Result<Normalizer, DataError> {
        if mean.len() != std.len() {
            return Err(DataError::Invalid {
                why: format!("{} means for {} scales", mean.len(), std.len()),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) || std.iter().any(|v| !(*v > 0.0) || !v.is_finite())
        {
            return Err(DataError::Invalid {
                why: "normalizer statistics must be finite with positive scales".to_string(),
            });
        }
        Ok(Normalizer { mean, std })
    }
}

/// Fit a z-score normalizer on the first `train_rows` rows only.
///
/// Standard deviation uses denominator N (population form). A column that is
/// constant over the training rows has no scale and is rejected by name.
pub fn zscore_fit(series: &Series, train_rows: usize) -> Result<Normalizer, DataError> {
    if train_rows == 0 || train_rows > series.rows() {
        return Err(DataError::BadSplit {
            why: format!(
                "cannot fit on {train_rows} rows of a {}-row series",
                series.rows()
            ),
        });
    }
    let cols = series.cols();
    let mut mean = vec![0.0; cols];
    let mut std = vec![0.0; cols];
    for c in 0..cols {
        let sum: f64 = (0..train_rows).map(|r| series.get(r, c)).sum();
        mean[c] = sum / train_rows as f64;
        let ss: f64 = (0..train_rows)
            .map(|r| {
                let d = series.get(r, c) - mean[c];
                d * d
            })
            .sum();
        std[c] = (ss / train_rows as f64).sqrt();
        if std[c] == 0.0 {
            return Err(DataError::ZeroVariance {
                column: series.names()[c].clone(),
            });
        }
    }
    Ok(Normalizer { mean, std })
}

/// Map a matrix whose columns align with the normalizer's into z-scores.
pub fn zscore_apply(norm: &Normalizer, m: &Tensor) -> Result<Tensor, DataError> {
    map_columns(norm, m, |norm, c, v| norm.apply_value(c, v))
}

/// Exact inverse of `zscore_apply`.
pub fn zscore_invert(norm: &Normalizer, m: &Tensor) -> Result<Tensor, DataError> {
    map_columns(norm, m, |norm, c, v| norm.invert_value(c, v))
}

fn map_columns(
    norm: &Normalizer,
    m: &Tensor,
    f: impl Fn(&Normalizer, usize, f64) -> f64,
) -> Result<Tensor, DataError> {
    if m.cols() != norm.cols() {
        return Err(DataError::Invalid {
            why: format!(
                "matrix has {} columns but the normalizer covers {}",
                m.cols(),
                norm.cols()
            ),
        });
    }
    let cols = m.cols();
    let data = m
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| f(norm, i % cols, v))
        .collect();
    Ok(Tensor::new(m.shape().to_vec(), data).expect("shape preserved"))
}

/// Apply a fitted normalizer to every row of a series.
pub fn normalized_series(series: &Series, norm: &Normalizer) -> Result<Series, DataError> {
    if norm.cols() != series.cols {
        return Err(DataError::Invalid {
            why: format!(
                "series has {} columns but the normalizer covers {}",
                series.cols,
                norm.cols()
            ),
        });
    }
    let values = series
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| norm.apply_value(i % series.cols, v))
        .collect();
    Ok(Series {
        names: series.names.clone(),
        values,
        rows: series.rows,
        cols: series.cols,
    })
}

/// Split a label column off a series: the remaining columns (in order) become
/// the channels, the labels become class ids. Labels must be non-negative
/// integers stored exactly (no rounding is performed).
pub fn split_label_column(series: &Series, label: &str) -> Result<(Series, Vec<usize>), DataError> {
    let li = series
        .column_index(label)
        .ok_or_else(|| DataError::MissingColumn {
            name: label.to_string(),
        })?;
    if series.cols() < 2 {
        return Err(DataError::Invalid {
            why: "a label column alone leaves no channels".to_string(),
        });
    }
    let mut labels = Vec::with_capacity(series.rows());
    for r in 0..series.rows() {
        let v = series.get(r, li);
        if !(v >= 0.0) || v.fract() != 0.0 || v >= usize::MAX as f64 {
            return Err(DataError::BadLabel { row: r, value: v });
        }
        labels.push(v as usize);
    }
    let names = series
        .names()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != li)
        .map(|(_, n)| n.clone())
        .collect();
    let mut values = Vec::with_capacity(series.rows() * (series.cols() - 1));
    for r in 0..series.rows() {
        for c in 0..series.cols() {
            if c != li {
                values.push(series.get(r, c));
            }
        }
    }
    Ok((Series::new(names, values)?, labels))
}

/// Supervision attached to a windowed dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// One H-step-ahead row per sample: shape S x H.
    Regression(Tensor),
    /// One class id per sample.
    Classes(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Regression(t) => t.rows(),
            Targets::Classes(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sliding windows over a series, plus the normalizer that produced them.
///
/// Sample i's input covers rows [i*stride, i*stride + window); its target
/// covers the `horizon` rows immediately after — the two never overlap and
/// the target always follows the input in time.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// Shape [S, window, channels], row-major.
    inputs: Tensor,
    targets: Targets,
    pub normalizer: Normalizer,
    pub window: usize,
    pub horizon: usize,
    pub stride: usize,
    /// Column the regression targets were read from; None for class targets.
    pub target_column: Option<usize>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.inputs.shape()[2]
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Copy of sample i's input as a window x channels matrix.
    pub fn input(&self, i: usize) -> Tensor {
        let (l, c) = (self.window, self.channels());
        let start = i * l * c;
        Tensor::matrix(l, c, self.inputs.data()[start..start + l * c].to_vec())
            .expect("stored windows are well-shaped")
    }

    /// Stack the chosen samples into one (B*window) x channels matrix.
    pub fn batch_inputs(&self, idx: &[usize]) -> Tensor {
        let (l, c) = (self.window, self.channels());
        let mut data = Vec::with_capacity(idx.len() * l * c);
        for &i in idx {
            let start = i * l * c;
            data.extend_from_slice(&self.inputs.data()[start..start + l * c]);
        }
        Tensor::matrix(idx.len() * l, c, data).expect("stacked windows are well-shaped")
    }

    /// Targets of the chosen samples, same order.
    pub fn batch_targets(&self, idx: &[usize]) -> Targets {
        match &self.targets {
            Targets::Regression(t) => {
                let h = t.cols();
                let mut data = Vec::with_capacity(idx.len() * h);
                for &i in idx {
                    data.extend_from_slice(&t.data()[i * h..(i + 1) * h]);
                }
                Targets::Regression(Tensor::matrix(idx.len(), h, data).expect("target rows"))
            }
            Targets::Classes(c) => Targets::Classes(idx.iter().map(|&i| c[i]).collect()),
        }
    }

    fn slice(&self, start: usize, end: usize) -> WindowedDataset {
        let idx: Vec<usize> = (start..end).collect();
        let inputs2 = self.batch_inputs(&idx);
        let (l, c) = (self.window, self.channels());
        WindowedDataset {
            inputs: Tensor::new(vec![end - start, l, c], inputs2.data().to_vec())
                .expect("sliced windows are well-shaped"),
            targets: self.batch_targets(&idx),
            normalizer: self.normalizer.clone(),
            window: self.window,
            horizon: self.horizon,
            stride: self.stride,
            target_column: self.target_column,
        }
    }
}

/// Number of samples a sliding window yields: floor((N - L - H) / stride) + 1.
pub fn window_count(rows: usize, window: usize, horizon: usize, stride: usize) -> Option<usize> {
    if stride == 0 || rows < window + horizon {
        return None;
    }
    Some((rows - window - horizon) / stride + 1)
}

/// Cut forecasting windows: sample i's input is rows [i*stride, i*stride+L),
/// its target the next H values of `target_column`. The attached normalizer
/// is the identity; the pipeline functions replace it with a fitted one.
pub fn make_windows(
    series: &Series,
    window: usize,
    horizon: usize,
    stride: usize,
    target_column: usize,
) -> Result<WindowedDataset, DataError> {
    if window == 0 || horizon == 0 || stride == 0 {
        return Err(DataError::Invalid {
            why: "window, horizon and stride must all be positive".to_string(),
        });
    }
    if target_column >= series.cols() {
        return Err(DataError::MissingColumn {
            name: format!("column index {target_column}"),
        });
    }
    let s = window_count(series.rows(), window, horizon, stride).ok_or(
        DataError::InsufficientData {
            rows: series.rows(),
            window,
            horizon,
        },
    )?;
    let c = series.cols();
    let mut inputs = Vec::with_capacity(s * window * c);
    let mut targets = Vec::with_capacity(s * horizon);
    for i in 0..s {
        let start = i * stride;
        for r in start..start + window {
            inputs.extend_from_slice(series.row(r));
        }
        for r in start + window..start + window + horizon {
            targets.push(series.get(r, target_column));
        }
    }
    Ok(WindowedDataset {
        inputs: Tensor::new(vec![s, window, c], inputs).expect("window layout"),
        targets: Targets::Regression(Tensor::matrix(s, horizon, targets).expect("target layout")),
        normalizer: Normalizer::identity(c),
        window,
        horizon,
        stride,
        target_column: Some(target_column),
    })
}

/// Cut classification windows: sample i's input is rows [i*stride,
/// i*stride+L) and its class is the label of the window's last row.
pub fn make_class_windows(
    series: &Series,
    labels: &[usize],
    window: usize,
    stride: usize,
) -> Result<WindowedDataset, DataError> {
    if window == 0 || stride == 0 {
        return Err(DataError::Invalid {
            why: "window and stride must be positive".to_string(),
        });
    }
    if labels.len() != series.rows() {
        return Err(DataError::Invalid {
            why: format!(
                "{} labels for {} rows",
                labels.len(),
                series.rows()
            ),
        });
    }
    let s = window_count(series.rows(), window, 0, stride).ok_or(DataError::InsufficientData {
        rows: series.rows(),
        window,
        horizon: 0,
    })?;
    let c = series.cols();
    let mut inputs = Vec::with_capacity(s * window * c);
    let mut classes = Vec::with_capacity(s);
    for i in 0..s {
        let start = i * stride;
        for r in start..start + window {
            inputs.extend_from_slice(series.row(r));
        }
        classes.push(labels[start + window - 1]);
    }
    Ok(WindowedDataset {
        inputs: Tensor::new(vec![s, window, c], inputs).expect("window layout"),
        targets: Targets::Classes(classes),
        normalizer: Normalizer::identity(c),
        window,
        horizon: 0,
        stride,
        target_column: None,
    })
}

/// Chronological split: the first floor(S * fraction) samples train, the
/// remainder test, order untouched.
pub fn chrono_split(
    dataset: &WindowedDataset,
    train_fraction: f64,
) -> Result<(WindowedDataset, WindowedDataset), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::BadSplit {
            why: format!("train fraction {train_fraction} is not inside (0, 1)"),
        });
    }
    let s = dataset.len();
    if s < 2 {
        return Err(DataError::BadSplit {
            why: format!("cannot split {s} sample(s)"),
        });
    }
    let train = (s as f64 * train_fraction).floor() as usize;
    Ok((dataset.slice(0, train), dataset.slice(train, s)))
}

/// Rows the first `train_samples` windows touch, inputs and targets included.
fn covered_rows(train_samples: usize, window: usize, horizon: usize, stride: usize) -> usize {
    (train_samples - 1) * stride + window + horizon
}

/// Windowed forecasting dataset with leakage-free normalization.
///
/// The split point is decided first; the normalizer is fitted on exactly the
/// rows the training windows (inputs and targets) cover, then applied to the
/// whole series before windowing. Both halves carry that same normalizer.
pub fn forecast_pipeline(
    series: &Series,
    window: usize,
    horizon: usize,
    stride: usize,
    target_column: usize,
    train_fraction: f64,
) -> Result<(WindowedDataset, WindowedDataset), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::BadSplit {
            why: format!("train fraction {train_fraction} is not inside (0, 1)"),
        });
    }
    if stride == 0 || window == 0 || horizon == 0 {
        return Err(DataError::Invalid {
            why: "window, horizon and stride must all be positive".to_string(),
        });
    }
    let s = window_count(series.rows(), window, horizon, stride).ok_or(
        DataError::InsufficientData {
            rows: series.rows(),
            window,
            horizon,
        },
    )?;
    let train_samples = (s as f64 * train_fraction).floor() as usize;
    if train_samples == 0 || train_samples == s {
        return Err(DataError::BadSplit {
            why: format!("fraction {train_fraction} of {s} samples leaves one side empty"),
        });
    }
    let train_rows = covered_rows(train_samples, window, horizon, stride);
    let norm = zscore_fit(series, train_rows)?;
    let normalized = normalized_series(series, &norm)?;
    let mut windows = make_windows(&normalized, window, horizon, stride, target_column)?;
    windows.normalizer = norm;
    chrono_split(&windows, train_fraction)
}

/// Classification twin of `forecast_pipeline`.
pub fn class_pipeline(
    series: &Series,
    labels: &[usize],
    window: usize,
    stride: usize,
    train_fraction: f64,
) -> Result<(WindowedDataset, WindowedDataset), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::BadSplit {
            why: format!("train fraction {train_fraction} is not inside (0, 1)"),
        });
    }
    if stride == 0 || window == 0 {
        return Err(DataError::Invalid {
            why: "window and stride must be positive".to_string(),
        });
    }
    let s = window_count(series.rows(), window, 0, stride).ok_or(DataError::InsufficientData {
        rows: series.rows(),
        window,
        horizon: 0,
    })?;
    let train_samples = (s as f64 * train_fraction).floor() as usize;
    if train_samples == 0 || train_samples == s {
        return Err(DataError::BadSplit {
            why: format!("fraction {train_fraction} of {s} samples leaves one side empty"),
        });
    }
    let train_rows = covered_rows(train_samples, window, 0, stride);
    let norm = zscore_fit(series, train_rows)?;
    let normalized = normalized_series(series, &norm)?;
    let mut windows = make_class_windows(&normalized, labels, window, stride)?;
    windows.normalizer = norm;
    chrono_split(&windows, train_fraction)
}

impl From<csv::Error> for DataError {
    fn from(e: csv::Error) -> DataError {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            DataError::Io(io)
        } else {
            DataError::Csv("malformed csv record".to_string())
        }
    }
}

/// Load the named columns of a headered CSV file into a `Series`.
///
/// The returned columns are the union of target and features, kept in file
/// order; resolve positions by name afterwards. Cells must parse as finite
/// decimal floats; failures carry the 1-based file line (header is line 1).
pub fn load_csv(
    path: &Path,
    target_column: &str,
    feature_columns: &[String],
) -> Result<Series, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let index_of = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(DataError::MissingColumn {
                name: name.to_string(),
            })
    };
    let mut selected: Vec<usize> = Vec::new();
    for name in feature_columns
        .iter()
        .map(String::as_str)
        .chain(std::iter::once(target_column))
    {
        let idx = index_of(name)?;
        if !selected.contains(&idx) {
            selected.push(idx);
        }
    }
    selected.sort_unstable();
    let names: Vec<String> = selected.iter().map(|&i| headers[i].to_string()).collect();

    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(0);
        for &col in &selected {
            let cell = record.get(col).ok_or_else(|| DataError::MissingValue {
                line,
                column: headers[col].to_string(),
            })?;
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(DataError::MissingValue {
                    line,
                    column: headers[col].to_string(),
                });
            }
            let parsed: f64 = cell.parse().map_err(|_| DataError::Parse {
                line,
                column: headers[col].to_string(),
                value: cell.to_string(),
            })?;
            if !parsed.is_finite() {
                return Err(DataError::Parse {
                    line,
                    column: headers[col].to_string(),
                    value: cell.to_string(),
                });
            }
            values.push(parsed);
        }
    }
    Series::new(names, values)
}
