//! Plain-text run configuration: `key = value` lines, `#` comments.
//!
//! Parsing is total — every non-blank line either binds a known key exactly
//! once or produces an error carrying its 1-based line number. Values that
//! parse individually but cannot hold together (say, an `in_channels` that
//! contradicts the feature list) are rejected when the model configuration
//! is assembled.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use cura_core::{
    ConvMode, CuraConfig, FilterKind, GateActivation, GatingKind, Hyperparams, Nonlinearity,
    Pooling,
};

/// Which protocol a run follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Predict the next `horizon` values of the target column.
    Forecast,
    /// Predict a class id per window; the target column holds integer labels.
    Classify,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Forecast => write!(f, "forecast"),
            Task::Classify => write!(f, "classify"),
        }
    }
}

/// Errors from reading or assembling a run configuration.
#[derive(Debug)]
pub enum ConfigFileError {
    Io(std::io::Error),
    /// A line failed to parse or bind; 1-based line number.
    Line { line: usize, message: String },
    /// A key the requested operation needs is absent.
    MissingKey { key: &'static str, hint: &'static str },
    /// Keys that parse individually but contradict each other.
    Inconsistent { message: String },
}

impl fmt::Display for ConfigFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigFileError::Io(e) => write!(f, "config: {e}"),
            ConfigFileError::Line { line, message } => write!(f, "config line {line}: {message}"),
            ConfigFileError::MissingKey { key, hint } => {
                write!(f, "config: missing key `{key}` ({hint})")
            }
            ConfigFileError::Inconsistent { message } => write!(f, "config: {message}"),
        }
    }
}

impl std::error::Error for ConfigFileError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ConfigFileError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for ConfigFileError {
    fn from(e: std::io::Error) -> Self {
        ConfigFileError::Io(e)
    }
}

/// A fully parsed run configuration. Optional fields have no sensible
/// default and are demanded lazily, so a `params`-only file can omit the
/// data path and a forecast file can omit `num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Option<Task>,
    pub data: Option<PathBuf>,
    pub target: Option<String>,
    /// Channel columns by name; empty means "just the target".
    pub features: Vec<String>,
    pub window: Option<usize>,
    pub horizon: usize,
    pub stride: usize,
    pub train_fraction: f64,
    pub num_classes: Option<usize>,
    /// Redundant with the column lists; checked against them when set.
    pub in_channels: Option<usize>,
    pub model_dim: Option<usize>,
    pub gating: GatingKind,
    pub gate_activation: GateActivation,
    pub nonlinearity: Nonlinearity,
    pub filter: FilterKind,
    pub filter_mode: ConvMode,
    pub kernel_size: usize,
    pub pooling: Pooling,
    /// Seeds both initialization and batch shuffling.
    pub seed: u64,
    hyper: Hyperparams,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            task: None,
            data: None,
            target: None,
            features: Vec::new(),
            window: None,
            horizon: 1,
            stride: 1,
            train_fraction: 0.8,
            num_classes: None,
            in_channels: None,
            model_dim: None,
            gating: GatingKind::Multiplicative,
            gate_activation: GateActivation::Sigmoid,
            nonlinearity: Nonlinearity::Relu,
            filter: FilterKind::Conv1d,
            filter_mode: ConvMode::Depthwise,
            kernel_size: 3,
            pooling: Pooling::Mean,
            seed: 0,
            hyper: Hyperparams::default(),
        }
    }
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("key `{key}`: cannot parse `{value}`"))
}

fn parse_choice<T: Copy>(key: &str, value: &str, choices: &[(&str, T)]) -> Result<T, String> {
    choices
        .iter()
        .find(|(name, _)| *name == value)
        .map(|&(_, v)| v)
        .ok_or_else(|| {
            let names: Vec<&str> = choices.iter().map(|&(n, _)| n).collect();
            format!("key `{key}`: `{value}` is not one of {}", names.join(" | "))
        })
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig, ConfigFileError> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<RunConfig, ConfigFileError> {
        let mut rc = RunConfig::default();
        let mut seen: HashSet<String> = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let fail = |message: String| ConfigFileError::Line { line, message };
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped
                .split_once('=')
                .ok_or_else(|| fail("expected `key = value`".to_string()))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(fail("expected `key = value`".to_string()));
            }
            if !seen.insert(key.to_string()) {
                return Err(fail(format!("duplicate key `{key}`")));
            }
            rc.bind(key, value).map_err(fail)?;
        }
        Ok(rc)
    }

    fn bind(&mut self, key: &str, value: &str) -> Result<(), String> {
        let positive = |n: usize| -> Result<usize, String> {
            if n == 0 {
                Err(format!("key `{key}`: must be positive"))
            } else {
                Ok(n)
            }
        };
        match key {
            "task" => {
                self.task = Some(parse_choice(
                    key,
                    value,
                    &[("forecast", Task::Forecast), ("classify", Task::Classify)],
                )?)
            }
            "data" => self.data = Some(PathBuf::from(value)),
            "target" => self.target = Some(value.to_string()),
            "features" => {
                let mut names = Vec::new();
                for item in value.split(',') {
                    let item = item.trim();
                    if item.is_empty() {
                        return Err(format!("key `{key}`: empty column name in `{value}`"));
                    }
                    names.push(item.to_string());
                }
                self.features = names;
            }
            "window" => self.window = Some(positive(parse_as(key, value)?)?),
            "horizon" => self.horizon = positive(parse_as(key, value)?)?,
            "stride" => self.stride = positive(parse_as(key, value)?)?,
            "train_fraction" => {
                let f: f64 = parse_as(key, value)?;
                if !(f > 0.0 && f < 1.0) {
                    return Err(format!("key `{key}`: {f} is not inside (0, 1)"));
                }
                self.train_fraction = f;
            }
            "num_classes" => self.num_classes = Some(positive(parse_as(key, value)?)?),
            "in_channels" => self.in_channels = Some(positive(parse_as(key, value)?)?),
            "model_dim" => self.model_dim = Some(positive(parse_as(key, value)?)?),
            "out_dim" => {
                // Accepted for symmetry with the model config, but it is
                // always derivable; reject rather than risk a silent clash.
                return Err(format!(
                    "key `{key}`: set `horizon` (forecast) or `num_classes` (classify) instead"
                ));
            }
            "gating" => {
                self.gating = parse_choice(
                    key,
                    value,
                    &[
                        ("multiplicative", GatingKind::Multiplicative),
                        ("linear", GatingKind::Linear),
                        ("convolutional", GatingKind::Convolutional),
                    ],
                )?
            }
            "gate_activation" => {
                self.gate_activation = parse_choice(
                    key,
                    value,
                    &[
                        ("sigmoid", GateActivation::Sigmoid),
                        ("hard_sigmoid", GateActivation::HardSigmoid),
                    ],
                )?
            }
            "nonlinearity" => {
                self.nonlinearity = parse_choice(
                    key,
                    value,
                    &[
                        ("relu", Nonlinearity::Relu),
                        ("gelu", Nonlinearity::Gelu),
                        ("tanh_conv", Nonlinearity::TanhConv),
                    ],
                )?
            }
            "filter" => {
                self.filter = parse_choice(
                    key,
                    value,
                    &[
                        ("conv1d", FilterKind::Conv1d),
                        ("linear_1x1", FilterKind::Linear1x1),
                        ("none", FilterKind::None),
                    ],
                )?
            }
            "filter_mode" => {
                self.filter_mode = parse_choice(
                    key,
                    value,
                    &[("depthwise", ConvMode::Depthwise), ("full", ConvMode::Full)],
                )?
            }
            "kernel_size" => self.kernel_size = positive(parse_as(key, value)?)?,
            "pooling" => {
                self.pooling = parse_choice(
                    key,
                    value,
                    &[("mean", Pooling::Mean), ("last", Pooling::Last)],
                )?
            }
            "seed" => self.seed = parse_as(key, value)?,
            "learning_rate" => self.hyper.learning_rate = parse_as(key, value)?,
            "beta1" => self.hyper.beta1 = parse_as(key, value)?,
            "beta2" => self.hyper.beta2 = parse_as(key, value)?,
            "epsilon" => self.hyper.epsilon = parse_as(key, value)?,
            "amsgrad" => {
                self.hyper.amsgrad =
                    parse_choice(key, value, &[("true", true), ("false", false)])?
            }
            "weight_decay" => self.hyper.weight_decay = parse_as(key, value)?,
            "epochs" => self.hyper.epochs = parse_as(key, value)?,
            "batch_size" => self.hyper.batch_size = positive(parse_as(key, value)?)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn task(&self) -> Result<Task, ConfigFileError> {
        self.task.ok_or(ConfigFileError::MissingKey {
            key: "task",
            hint: "forecast or classify",
        })
    }

    /// Distinct channel columns in declaration order: the features plus the
    /// target for forecasting (the model predicts a column it also sees);
    /// the features alone for classification (the label is not a channel).
    pub fn channel_names(&self) -> Result<Vec<String>, ConfigFileError> {
        let task = self.task()?;
        let mut names: Vec<String> = Vec::new();
        for f in &self.features {
            if !names.contains(f) {
                names.push(f.clone());
            }
        }
        match task {
            Task::Forecast => {
                let target = self.target.clone().ok_or(ConfigFileError::MissingKey {
                    key: "target",
                    hint: "the column to forecast",
                })?;
                if !names.contains(&target) {
                    names.push(target);
                }
            }
            Task::Classify => {
                if names.is_empty() {
                    return Err(ConfigFileError::MissingKey {
                        key: "features",
                        hint: "classification needs explicit channel columns",
                    });
                }
            }
        }
        Ok(names)
    }

    /// Channel count implied by the configuration alone, for data-free
    /// operations like parameter counting.
    pub fn declared_channels(&self) -> Result<usize, ConfigFileError> {
        match self.in_channels {
            Some(c) => Ok(c),
            None => Ok(self.channel_names()?.len()),
        }
    }

    /// Assemble the model configuration for `channels` input channels (the
    /// caller knows the real count once the data is loaded).
    pub fn model_config(&self, channels: usize) -> Result<CuraConfig, ConfigFileError> {
        let task = self.task()?;
        if let Some(declared) = self.in_channels {
            if declared != channels {
                return Err(ConfigFileError::Inconsistent {
                    message: format!(
                        "in_channels = {declared} but the column lists give {channels} channels"
                    ),
                });
            }
        }
        let window = self.window.ok_or(ConfigFileError::MissingKey {
            key: "window",
            hint: "input steps per sample",
        })?;
        let model_dim = self.model_dim.ok_or(ConfigFileError::MissingKey {
            key: "model_dim",
            hint: "width of the hidden stages",
        })?;
        let out_dim = match task {
            Task::Forecast => self.horizon,
            Task::Classify => self.num_classes.ok_or(ConfigFileError::MissingKey {
                key: "num_classes",
                hint: "number of distinct labels",
            })?,
        };
        let config = CuraConfig {
            in_channels: channels,
            seq_len: window,
            model_dim,
            out_dim,
            gating_kind: self.gating,
            gate_activation: self.gate_activation,
            nonlinearity: self.nonlinearity,
            filter_kind: self.filter,
            filter_mode: self.filter_mode,
            kernel_size: self.kernel_size,
            pooling: self.pooling,
            seed: self.seed,
        };
        config.validate().map_err(|e| ConfigFileError::Inconsistent {
            message: e.to_string(),
        })?;
        Ok(config)
    }

    /// Training knobs; the run's one seed feeds the shuffle stream too.
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            seed: self.seed,
            ..self.hyper.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_forecast_config() {
        let rc = RunConfig::parse(
            "# forecasting run\n\
             task = forecast\n\
             data = series.csv\n\
             target = price\n\
             features = price, volume\n\
             window = 20\n\
             horizon = 2\n\
             stride = 1\n\
             train_fraction = 0.75\n\
             model_dim = 16\n\
             gating = multiplicative\n\
             gate_activation = sigmoid\n\
             nonlinearity = relu\n\
             filter = conv1d\n\
             filter_mode = depthwise\n\
             kernel_size = 5\n\
             pooling = last\n\
             seed = 9\n\
             learning_rate = 0.01   # fast\n\
             epochs = 50\n\
             batch_size = 8\n",
        )
        .unwrap();
        assert_eq!(rc.task, Some(Task::Forecast));
        assert_eq!(rc.channel_names().unwrap(), vec!["price", "volume"]);
        let config = rc.model_config(2).unwrap();
        assert_eq!(config.seq_len, 20);
        assert_eq!(config.out_dim, 2);
        assert_eq!(config.kernel_size, 5);
        assert_eq!(config.pooling, Pooling::Last);
        assert_eq!(config.seed, 9);
        let hyper = rc.hyperparams();
        assert_eq!(hyper.learning_rate, 0.01);
        assert_eq!(hyper.epochs, 50);
        assert_eq!(hyper.batch_size, 8);
        assert_eq!(hyper.seed, 9);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let err = RunConfig::parse("task = forecast\nwibble = 3\n").unwrap_err();
        match err {
            ConfigFileError::Line { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("wibble"), "{message}");
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn duplicate_and_malformed_lines_are_rejected() {
        let dup = RunConfig::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(dup.to_string().contains("duplicate key `seed`"));
        let bare = RunConfig::parse("just words\n").unwrap_err();
        assert!(bare.to_string().contains("line 1"));
        let empty = RunConfig::parse("seed =\n").unwrap_err();
        assert!(empty.to_string().contains("line 1"));
    }

    #[test]
    fn bad_enum_value_lists_the_choices() {
        let err = RunConfig::parse("pooling = median\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("mean | last"), "{text}");
    }

    #[test]
    fn forecast_channels_include_the_target_once() {
        let rc =
            RunConfig::parse("task = forecast\ntarget = x\nfeatures = x, y\n").unwrap();
        assert_eq!(rc.channel_names().unwrap(), vec!["x", "y"]);
        let rc = RunConfig::parse("task = forecast\ntarget = x\n").unwrap();
        assert_eq!(rc.channel_names().unwrap(), vec!["x"]);
    }

    #[test]
    fn classification_demands_features_and_num_classes() {
        let rc = RunConfig::parse("task = classify\ntarget = label\n").unwrap();
        assert!(matches!(
            rc.channel_names(),
            Err(ConfigFileError::MissingKey { key: "features", .. })
        ));
        let rc = RunConfig::parse(
            "task = classify\ntarget = label\nfeatures = a, b\nwindow = 4\nmodel_dim = 4\n",
        )
        .unwrap();
        assert!(matches!(
            rc.model_config(2),
            Err(ConfigFileError::MissingKey { key: "num_classes", .. })
        ));
    }

    #[test]
    fn declared_in_channels_must_match_the_columns() {
        let rc = RunConfig::parse(
            "task = forecast\ntarget = x\nin_channels = 3\nwindow = 4\nmodel_dim = 4\n",
        )
        .unwrap();
        assert!(matches!(
            rc.model_config(1),
            Err(ConfigFileError::Inconsistent { .. })
        ));
        assert_eq!(rc.declared_channels().unwrap(), 3);
    }

    #[test]
    fn out_dim_is_not_directly_settable() {
        let err = RunConfig::parse("out_dim = 4\n").unwrap_err();
        assert!(err.to_string().contains("horizon"));
    }

    #[test]
    fn bounds_are_checked_at_bind_time() {
        assert!(RunConfig::parse("window = 0\n").is_err());
        assert!(RunConfig::parse("train_fraction = 1.0\n").is_err());
        assert!(RunConfig::parse("batch_size = 0\n").is_err());
        assert!(RunConfig::parse("amsgrad = yes\n").is_err());
    }
}
