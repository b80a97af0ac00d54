//! Error types for every layer of the crate.
//!
//! Each domain gets its own enum so callers can match on exactly the
//! failures that layer can produce; nothing is stringly-typed.

use std::fmt;

/// Errors from tensor arithmetic and the differentiation tape.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorError {
    /// Operand shapes are incompatible for the named operation.
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// A scalar argument is outside the operation's domain (e.g. kernel size 0).
    BadParameter { op: &'static str, what: String },
    /// `backward` was called on a tensor that is not a scalar.
    NotScalarLoss { shape: Vec<usize> },
    /// A tensor was used with a tape it was not recorded on.
    NotOnTape { op: &'static str },
    /// `backward` was already run for this tape's trace.
    TapeConsumed,
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::ShapeMismatch { op, left, right } => {
                write!(f, "{op}: shape mismatch between {left:?} and {right:?}")
            }
            TensorError::BadParameter { op, what } => write!(f, "{op}: {what}"),
            TensorError::NotScalarLoss { shape } => {
                write!(f, "backward: loss must be a scalar, got shape {shape:?}")
            }
            TensorError::NotOnTape { op } => {
                write!(f, "{op}: tensor is not recorded on this tape")
            }
            TensorError::TapeConsumed => {
                write!(f, "backward: this tape's trace was already consumed")
            }
        }
    }
}

impl std::error::Error for TensorError {}

/// Errors from model-configuration validation.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// A field violates its documented bound.
    Field { name: &'static str, why: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Field { name, why } => write!(f, "config field `{name}`: {why}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Errors from metric computations.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricError {
    /// Metric on an empty input.
    EmptyInput { metric: &'static str },
    /// Paired inputs of different lengths.
    LengthMismatch {
        metric: &'static str,
        left: usize,
        right: usize,
    },
    /// R^2 is undefined when the target has no variance (or fewer than 2 points).
    DegenerateTarget,
    /// A class id is outside `[0, num_classes)`.
    BadClassId { id: usize, num_classes: usize },
    /// Parameter efficiency needs a positive parameter count.
    NonPositiveParams,
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::EmptyInput { metric } => write!(f, "{metric}: empty input"),
            MetricError::LengthMismatch {
                metric,
                left,
                right,
            } => write!(f, "{metric}: length mismatch ({left} vs {right})"),
            MetricError::DegenerateTarget => {
                write!(f, "r2_score: target needs at least 2 points and nonzero variance")
            }
            MetricError::BadClassId { id, num_classes } => {
                write!(f, "class id {id} out of range for {num_classes} classes")
            }
            MetricError::NonPositiveParams => {
                write!(f, "parameter_efficiency: parameter count must be positive")
            }
        }
    }
}

impl std::error::Error for MetricError {}

/// Errors from the training loop and optimizer.
#[derive(Debug)]
pub enum TrainError {
    /// The dataset has no samples.
    EmptyDataset,
    /// Dataset shape or task kind does not match the model config.
    DatasetMismatch { why: String },
    /// The loss became non-finite during the named epoch (0-based).
    Divergence { epoch: usize },
    /// Parameter/gradient lists passed to the optimizer disagree.
    GradientMismatch { why: String },
    /// A tensor-level failure surfaced during training.
    Tensor(TensorError),
    /// A config-level failure surfaced during training.
    Config(ConfigError),
    /// A metric-level failure surfaced while computing the report.
    Metric(MetricError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::EmptyDataset => write!(f, "fit: dataset is empty"),
            TrainError::DatasetMismatch { why } => write!(f, "fit: dataset mismatch: {why}"),
            TrainError::Divergence { epoch } => {
                write!(f, "fit: loss became non-finite at epoch {epoch}")
            }
            TrainError::GradientMismatch { why } => {
                write!(f, "optimizer: gradient mismatch: {why}")
            }
            TrainError::Tensor(e) => write!(f, "{e}"),
            TrainError::Config(e) => write!(f, "{e}"),
            TrainError::Metric(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for TrainError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            TrainError::Tensor(e) => Some(e),
            TrainError::Config(e) => Some(e),
            TrainError::Metric(e) => Some(e),
            _ => None,
        }
    }
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Tensor(e)
    }
}

impl From<ConfigError> for TrainError {
    fn from(e: ConfigError) -> Self {
        TrainError::Config(e)
    }
}

impl From<MetricError> for TrainError {
    fn from(e: MetricError) -> Self {
        TrainError::Metric(e)
    }
}

/// Errors from ingestion, normalization, windowing and synthesis.
#[derive(Debug)]
pub enum DataError {
    /// Underlying I/O failure.
    Io(std::io::Error),
    /// CSV structure failure (bad header, ragged row, ...).
    Csv(String),
    /// A requested column is absent from the header.
    MissingColumn { name: String },
    /// A cell failed to parse as a finite number; `line` is the 1-based file line.
    Parse {
        line: usize,
        column: String,
        value: String,
    },
    /// Empty cells are rejected outright; `line` is the 1-based file line.
    MissingValue { line: usize, column: String },
    /// The series is too short for the requested windowing.
    InsufficientData {
        rows: usize,
        window: usize,
        horizon: usize,
    },
    /// A column has zero variance over the fitting rows.
    ZeroVariance { column: String },
    /// `train_fraction` outside (0, 1), or a split with fewer than 2 samples.
    BadSplit { why: String },
    /// Labels that are not valid class ids.
    BadLabel { row: usize, value: f64 },
    /// Anything else that makes the request unsatisfiable.
    Invalid { why: String },
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::Io(e) => write!(f, "io: {e}"),
            DataError::Csv(what) => write!(f, "csv: {what}"),
            DataError::MissingColumn { name } => write!(f, "missing column `{name}`"),
            DataError::Parse {
                line,
                column,
                value,
            } => write!(f, "line {line}: column `{column}`: cannot parse `{value}` as a finite number"),
            DataError::MissingValue { line, column } => {
                write!(f, "line {line}: column `{column}`: missing value")
            }
            DataError::InsufficientData {
                rows,
                window,
                horizon,
            } => write!(f, "series of {rows} rows is too short for window {window} + horizon {horizon}"),
            DataError::ZeroVariance { column } => {
                write!(f, "column `{column}` has zero variance over the fitting rows")
            }
            DataError::BadSplit { why } => write!(f, "split: {why}"),
            DataError::BadLabel { row, value } => {
                write!(f, "row {row}: `{value}` is not a valid class label")
            }
            DataError::Invalid { why } => write!(f, "{why}"),
        }
    }
}

impl std::error::Error for DataError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            DataError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e)
    }
}
