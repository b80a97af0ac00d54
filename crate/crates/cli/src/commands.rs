//! The `cura` binary: argument surface and subcommand implementations.
//!
//! Exit codes: 0 on success, 1 when a well-formed run fails (I/O, data,
//! training), 2 when the invocation or its configuration is wrong (clap
//! reports its own parse failures with the same code).

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cura_core::{
    class_pipeline, count_params, cura_forward_batch, evaluate, fit, forecast_pipeline, gen_synth,
    load_csv, make_class_windows, make_windows, normalized_series, parameter_efficiency,
    split_label_column, argmax_rows, CuraConfig, DataError, Hyperparams, MetricError, Series,
    SynthKind, Tape, Tensor, TensorError, TrainError, WindowedDataset,
};

use crate::ablate::run_ablation;
use crate::model_file::{load_model, save_model, ModelFileError, PipelineMeta, SavedModel};
use crate::report;
use crate::run_config::{ConfigFileError, RunConfig, Task};

/// Failures at the command level, split by who is at fault.
#[derive(Debug)]
pub enum CliError {
    /// The invocation or its configuration is wrong: exit 2.
    Usage(String),
    /// A well-formed run failed while executing: exit 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigFileError> for CliError {
    fn from(e: ConfigFileError) -> Self {
        CliError::Usage(e.to_string())
    }
}
impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Runtime(e.to_string())
    }
}
impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        CliError::Runtime(e.to_string())
    }
}
impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        CliError::Runtime(e.to_string())
    }
}
impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Runtime(e.to_string())
    }
}
impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        CliError::Runtime(e.to_string())
    }
}
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "cura",
    version,
    about = "Train, evaluate and apply compact gated residual sequence models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fit a model from a run configuration; write the model and its report
    Train(TrainArgs),
    /// Score a saved model against a CSV using its training-time protocol
    Eval(EvalArgs),
    /// Apply a saved model to a CSV and write its predictions
    Predict(PredictArgs),
    /// Print the trainable-parameter count of a configuration
    Params(ParamsArgs),
    /// Train every architecture variant on the same split and rank them
    Ablate(AblateArgs),
    /// Write a seeded synthetic series as CSV
    GenSynth(GenSynthArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    /// Run configuration file (`key = value` lines, `#` comments)
    #[arg(long)]
    pub config: PathBuf,
    /// CSV data file; overrides the configuration
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target column; overrides the configuration
    #[arg(long)]
    pub target: Option<String>,
    /// Comma-separated channel columns; overrides the configuration
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Input steps per sample; overrides the configuration
    #[arg(long)]
    pub window: Option<usize>,
    /// Forecast steps per sample; overrides the configuration
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Seed for initialization and batch order; overrides the configuration
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model file to write; the report lands beside it as `<stem>.report.txt`
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Saved model file
    #[arg(long)]
    pub model: PathBuf,
    /// CSV to evaluate on; every window of it is scored
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Saved model file
    #[arg(long)]
    pub model: PathBuf,
    /// CSV to predict from; column names must match the saved channels
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions CSV to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ParamsArgs {
    /// Run configuration file
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args)]
pub struct AblateArgs {
    /// Run configuration file shared by every variant
    #[arg(long)]
    pub config: PathBuf,
    /// CSV data file; overrides the configuration
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Seed shared by every variant; overrides the configuration
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report file to write; without it the full report goes to stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum KindArg {
    /// Two mixed sinusoids per channel
    #[value(name = "sine_mix")]
    SineMix,
    /// Labelled blocks, one oscillation frequency per class
    #[value(name = "freq_classes")]
    FreqClasses,
    /// Second-order autoregression
    #[value(name = "linear_ar")]
    LinearAr,
}

#[derive(Args)]
pub struct GenSynthArgs {
    /// Generator family
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Rows to generate
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of the additive noise
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Class count (freq_classes only)
    #[arg(long, default_value_t = 6)]
    pub classes: usize,
    /// Rows per class block (freq_classes only)
    #[arg(long, default_value_t = 32)]
    pub block: usize,
    /// CSV file to write
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse the process arguments, run the chosen subcommand, map errors to
/// exit codes.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Params(args) => cmd_params(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::GenSynth(args) => cmd_gen_synth(args),
    }
}

// --- shared plumbing ---------------------------------------------------------

fn positive_flag(name: &str, v: Option<usize>) -> Result<Option<usize>, CliError> {
    match v {
        Some(0) => Err(CliError::Usage(format!("--{name} must be positive"))),
        other => Ok(other),
    }
}

/// Everything `train` and `ablate` share once the configuration is final:
/// loaded data, split, model config, hyperparameters and the pipeline
/// contract that will travel with the model.
struct PreparedRun {
    task: Task,
    config: CuraConfig,
    hyper: Hyperparams,
    train: WindowedDataset,
    test: WindowedDataset,
    meta: PipelineMeta,
}

fn prepare_run(rc: &RunConfig) -> Result<PreparedRun, CliError> {
    let task = rc.task()?;
    let data = rc.data.clone().ok_or(ConfigFileError::MissingKey {
        key: "data",
        hint: "CSV path; or pass --data",
    })?;
    let target = rc.target.clone().ok_or(ConfigFileError::MissingKey {
        key: "target",
        hint: "target column; or pass --target",
    })?;
    let channel_names = rc.channel_names()?;
    let series = load_csv(&data, &target, &channel_names)?;
    match task {
        Task::Forecast => {
            let ti = series
                .column_index(&target)
                .expect("loader guarantees the target column");
            let config = rc.model_config(series.cols())?;
            let hyper = rc.hyperparams();
            let (train, test) = forecast_pipeline(
                &series,
                config.seq_len,
                config.out_dim,
                rc.stride,
                ti,
                rc.train_fraction,
            )?;
            let meta = PipelineMeta {
                task,
                stride: rc.stride,
                feature_names: series.names().to_vec(),
                target_name: target,
                target_channel: Some(ti),
                normalizer: train.normalizer.clone(),
            };
            Ok(PreparedRun {
                task,
                config,
                hyper,
                train,
                test,
                meta,
            })
        }
        Task::Classify => {
            let (channels, labels) = split_label_column(&series, &target)?;
            let config = rc.model_config(channels.cols())?;
            let hyper = rc.hyperparams();
            let (train, test) =
                class_pipeline(&channels, &labels, config.seq_len, rc.stride, rc.train_fraction)?;
            let meta = PipelineMeta {
                task,
                stride: rc.stride,
                feature_names: channels.names().to_vec(),
                target_name: target,
                target_channel: None,
                normalizer: train.normalizer.clone(),
            };
            Ok(PreparedRun {
                task,
                config,
                hyper,
                train,
                test,
                meta,
            })
        }
    }
}

/// Load a CSV for a saved model and refuse any column drift: the loaded
/// channel columns must match the saved names in the saved order.
fn load_for_model(
    meta: &PipelineMeta,
    path: &Path,
    need_target: bool,
) -> Result<(Series, Option<Vec<usize>>), CliError> {
    let anchor = if need_target {
        meta.target_name.clone()
    } else {
        // Prediction does not need the label column; anchor the loader on a
        // channel instead. (A forecast target is itself a channel.)
        meta.feature_names[0].clone()
    };
    let series = load_csv(path, &anchor, &meta.feature_names)?;
    let (channels, labels) = match (meta.task, need_target) {
        (Task::Classify, true) => {
            let (c, l) = split_label_column(&series, &meta.target_name)?;
            (c, Some(l))
        }
        _ => (series, None),
    };
    if channels.names() != meta.feature_names.as_slice() {
        return Err(CliError::Runtime(format!(
            "data columns {:?} do not match the model's channels {:?}",
            channels.names(),
            meta.feature_names
        )));
    }
    Ok((channels, labels))
}

/// Windows for a saved model over a full series, normalized and cut exactly
/// as training did.
fn windows_for_model(
    model: &SavedModel,
    channels: &Series,
    labels: Option<&[usize]>,
) -> Result<WindowedDataset, CliError> {
    let meta = &model.meta;
    let normalized = normalized_series(channels, &meta.normalizer)?;
    let mut windows = match labels {
        None => make_windows(
            &normalized,
            model.config.seq_len,
            model.config.out_dim,
            meta.stride,
            meta.target_channel.expect("forecast models carry a target channel"),
        )?,
        Some(labels) => {
            make_class_windows(&normalized, labels, model.config.seq_len, meta.stride)?
        }
    };
    windows.normalizer = meta.normalizer.clone();
    Ok(windows)
}

// --- subcommands -------------------------------------------------------------

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let mut rc = RunConfig::from_path(&args.config)?;
    if let Some(d) = args.data {
        rc.data = Some(d);
    }
    if let Some(t) = args.target {
        rc.target = Some(t);
    }
    if let Some(f) = args.features {
        rc.features = f;
    }
    if let Some(w) = positive_flag("window", args.window)? {
        rc.window = Some(w);
    }
    if let Some(h) = positive_flag("horizon", args.horizon)? {
        rc.horizon = h;
    }
    if let Some(s) = args.seed {
        rc.seed = s;
    }

    let prep = prepare_run(&rc)?;
    let (params, train_report) = fit(&prep.config, &prep.train, &prep.test, &prep.hyper)?;
    let model = SavedModel {
        config: prep.config,
        params,
        meta: prep.meta,
    };
    save_model(&args.out, &model)?;
    let report_path = args.out.with_extension("report.txt");
    std::fs::write(
        &report_path,
        report::train_report_text(prep.task, &train_report),
    )?;

    print!("{}", report::train_lines(prep.task, &train_report));
    println!("wall_seconds = {}", train_report.wall_seconds);
    println!("model = {}", args.out.display());
    println!("report = {}", report_path.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let (channels, labels) = load_for_model(&model.meta, &args.data, true)?;
    let windows = windows_for_model(&model, &channels, labels.as_deref())?;
    let metrics = evaluate(&model.config, &model.params, &windows)?;
    let params = count_params(&model.config);
    let efficiency = parameter_efficiency(metrics.headline_pct(), params)?;
    print!(
        "{}",
        report::eval_report_text(model.meta.task, windows.len(), params, &metrics, efficiency)
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let meta = &model.meta;
    let (channels, _) = load_for_model(meta, &args.data, false)?;
    let config = &model.config;
    let (l, c) = (config.seq_len, config.in_channels);
    if channels.rows() < l {
        return Err(CliError::Runtime(format!(
            "{} data rows cannot fill one {l}-step window",
            channels.rows()
        )));
    }
    let normalized = normalized_series(&channels, &meta.normalizer)?;
    let starts: Vec<usize> = (0..=channels.rows() - l).step_by(meta.stride).collect();
    let mut raw = Vec::with_capacity(starts.len() * config.out_dim);
    for chunk in starts.chunks(128) {
        let mut data = Vec::with_capacity(chunk.len() * l * c);
        for &s in chunk {
            for r in s..s + l {
                data.extend_from_slice(normalized.row(r));
            }
        }
        let xb = Tensor::matrix(chunk.len() * l, c, data)?;
        let tape = Tape::new();
        let out = cura_forward_batch(&tape, &xb, &model.params, config, l)?;
        raw.extend_from_slice(out.data());
    }

    let mut text = String::new();
    match meta.task {
        Task::Forecast => {
            let tc = meta.target_channel.expect("forecast models carry a target channel");
            text.push_str("start");
            for h in 1..=config.out_dim {
                text.push_str(&format!(",yhat_{h}"));
            }
            text.push('\n');
            for (i, &start) in starts.iter().enumerate() {
                text.push_str(&start.to_string());
                for h in 0..config.out_dim {
                    let v = meta.normalizer.invert_value(tc, raw[i * config.out_dim + h]);
                    text.push_str(&format!(",{v}"));
                }
                text.push('\n');
            }
        }
        Task::Classify => {
            let logits = Tensor::matrix(starts.len(), config.out_dim, raw)?;
            let classes = argmax_rows(&logits);
            text.push_str("start,class\n");
            for (&start, &class) in starts.iter().zip(&classes) {
                text.push_str(&format!("{start},{class}\n"));
            }
        }
    }
    std::fs::write(&args.out, text)?;
    println!("windows = {}", starts.len());
    println!("predictions = {}", args.out.display());
    Ok(())
}

fn cmd_params(args: ParamsArgs) -> Result<(), CliError> {
    let rc = RunConfig::from_path(&args.config)?;
    let config = rc.model_config(rc.declared_channels()?)?;
    println!("{}", count_params(&config));
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<(), CliError> {
    let mut rc = RunConfig::from_path(&args.config)?;
    if let Some(d) = args.data {
        rc.data = Some(d);
    }
    if let Some(s) = args.seed {
        rc.seed = s;
    }
    let prep = prepare_run(&rc)?;
    let outcomes = run_ablation(&prep.config, &prep.train, &prep.test, &prep.hyper)?;
    let text = report::ablate_report_text(prep.task, rc.seed, &outcomes);
    match args.out {
        Some(path) => {
            std::fs::write(&path, &text)?;
            print!("{}", report::ranked_table(prep.task, &outcomes));
            println!("report = {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_gen_synth(args: GenSynthArgs) -> Result<(), CliError> {
    let kind = match args.kind {
        KindArg::SineMix => SynthKind::SineMix,
        KindArg::FreqClasses => SynthKind::FreqClasses {
            classes: args.classes,
            block: args.block,
        },
        KindArg::LinearAr => SynthKind::LinearAr,
    };
    let data = gen_synth(kind, args.n, args.channels, args.seed, args.noise)?;
    let series = &data.series;
    let mut text = String::new();
    text.push_str(&series.names().join(","));
    if data.labels.is_some() {
        text.push_str(",label");
    }
    text.push('\n');
    for r in 0..series.rows() {
        let row: Vec<String> = series.row(r).iter().map(|v| v.to_string()).collect();
        text.push_str(&row.join(","));
        if let Some(labels) = &data.labels {
            text.push_str(&format!(",{}", labels[r]));
        }
        text.push('\n');
    }
    std::fs::write(&args.out, text)?;
    println!("rows = {}", series.rows());
    println!("channels = {}", series.cols());
    println!("data = {}", args.out.display());
    Ok(())
}
