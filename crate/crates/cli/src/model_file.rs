//! Binary model files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "CURA"  magic
//! u16     format version
//! u32 x4  in_channels, seq_len, model_dim, out_dim
//! u8 x6   gating, gate activation, nonlinearity, filter, filter mode, pooling
//! u32     kernel_size
//! u64     seed
//! u8      task (0 forecast, 1 classify)
//! u32     stride
//! u16     channel count, then per channel: u16 name length + UTF-8 bytes
//! u16+... target column name
//! u16     target channel index (0xFFFF when the target is not a channel)
//! f64 x n per-channel means, then f64 x n per-channel scales
//! u16     blob count, then per blob: u8 rank, u32 per dim, f64 per element
//! u32     CRC-32 over every preceding byte
//! ```
//!
//! Parameter blobs appear in the model's canonical parameter order, so the
//! count and every shape are fully determined by the configuration; any
//! disagreement is a malformed file. The checksum is verified before any
//! field is interpreted, which keeps a single corrupted byte from ever
//! being read as data.

use std::fmt;
use std::path::Path;

use cura_core::{
    init_params, ConvMode, CuraConfig, CuraParams, FilterKind, GateActivation, GatingKind,
    Nonlinearity, Normalizer, Pooling,
};

use crate::run_config::Task;

pub const MAGIC: [u8; 4] = *b"CURA";
pub const FORMAT_VERSION: u16 = 1;

/// What the model needs to consume data the way training did: the column
/// contract, the windowing stride, and the fitted normalization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineMeta {
    pub task: Task,
    pub stride: usize,
    /// Channel columns in channel order.
    pub feature_names: Vec<String>,
    /// Forecast target or classification label column.
    pub target_name: String,
    /// The target's channel index; None when the target is not a channel.
    pub target_channel: Option<usize>,
    pub normalizer: Normalizer,
}

/// Everything a model file holds.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub config: CuraConfig,
    pub params: CuraParams,
    pub meta: PipelineMeta,
}

#[derive(Debug)]
pub enum ModelFileError {
    Io(std::io::Error),
    /// The file does not start with the expected magic bytes.
    BadMagic,
    /// The file's format version is newer than this reader.
    UnsupportedVersion(u16),
    /// The trailing CRC-32 does not match the file contents.
    ChecksumMismatch,
    /// Structurally broken content (truncation, bad tags, shape clashes…).
    Malformed(String),
    /// A value does not fit the fixed-width format fields.
    TooLarge(&'static str),
}

impl fmt::Display for ModelFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelFileError::Io(e) => write!(f, "model file: {e}"),
            ModelFileError::BadMagic => write!(f, "model file: bad magic bytes"),
            ModelFileError::UnsupportedVersion(v) => {
                write!(f, "model file: unsupported format version {v}")
            }
            ModelFileError::ChecksumMismatch => write!(f, "model file: checksum mismatch"),
            ModelFileError::Malformed(why) => write!(f, "model file: {why}"),
            ModelFileError::TooLarge(what) => {
                write!(f, "model file: {what} does not fit the format")
            }
        }
    }
}

impl std::error::Error for ModelFileError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ModelFileError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for ModelFileError {
    fn from(e: std::io::Error) -> Self {
        ModelFileError::Io(e)
    }
}

const GATING_TAGS: &[(u8, GatingKind)] = &[
    (0, GatingKind::Multiplicative),
    (1, GatingKind::Linear),
    (2, GatingKind::Convolutional),
];
const GATE_ACT_TAGS: &[(u8, GateActivation)] = &[
    (0, GateActivation::Sigmoid),
    (1, GateActivation::HardSigmoid),
];
const NONLIN_TAGS: &[(u8, Nonlinearity)] = &[
    (0, Nonlinearity::Relu),
    (1, Nonlinearity::Gelu),
    (2, Nonlinearity::TanhConv),
];
const FILTER_TAGS: &[(u8, FilterKind)] = &[
    (0, FilterKind::Conv1d),
    (1, FilterKind::Linear1x1),
    (2, FilterKind::None),
];
const CONV_MODE_TAGS: &[(u8, ConvMode)] = &[(0, ConvMode::Depthwise), (1, ConvMode::Full)];
const POOLING_TAGS: &[(u8, Pooling)] = &[(0, Pooling::Mean), (1, Pooling::Last)];
const TASK_TAGS: &[(u8, Task)] = &[(0, Task::Forecast), (1, Task::Classify)];

const NO_TARGET_CHANNEL: u16 = u16::MAX;

fn tag_of<T: PartialEq + Copy>(table: &[(u8, T)], v: T) -> u8 {
    table
        .iter()
        .find(|&&(_, x)| x == v)
        .map(|&(tag, _)| tag)
        .expect("every enum value is in its tag table")
}

fn from_tag<T: Copy>(table: &[(u8, T)], tag: u8, what: &str) -> Result<T, ModelFileError> {
    table
        .iter()
        .find(|&&(t, _)| t == tag)
        .map(|&(_, v)| v)
        .ok_or_else(|| ModelFileError::Malformed(format!("bad {what} tag {tag}")))
}

// --- encoding ---------------------------------------------------------------

struct Writer {
    bytes: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.bytes.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    fn usize32(&mut self, v: usize, what: &'static str) -> Result<(), ModelFileError> {
        self.u32(u32::try_from(v).map_err(|_| ModelFileError::TooLarge(what))?);
        Ok(())
    }
    fn str16(&mut self, s: &str, what: &'static str) -> Result<(), ModelFileError> {
        let len = u16::try_from(s.len()).map_err(|_| ModelFileError::TooLarge(what))?;
        self.u16(len);
        self.bytes.extend_from_slice(s.as_bytes());
        Ok(())
    }
}

/// Serialize a model to its byte form, checksum included.
pub fn encode_model(model: &SavedModel) -> Result<Vec<u8>, ModelFileError> {
    let SavedModel {
        config,
        params,
        meta,
    } = model;
    if meta.feature_names.len() != config.in_channels
        || meta.normalizer.cols() != config.in_channels
    {
        return Err(ModelFileError::Malformed(format!(
            "{} channel names and {} normalizer columns for {} input channels",
            meta.feature_names.len(),
            meta.normalizer.cols(),
            config.in_channels
        )));
    }
    let mut w = Writer { bytes: Vec::new() };
    w.bytes.extend_from_slice(&MAGIC);
    w.u16(FORMAT_VERSION);

    w.usize32(config.in_channels, "in_channels")?;
    w.usize32(config.seq_len, "seq_len")?;
    w.usize32(config.model_dim, "model_dim")?;
    w.usize32(config.out_dim, "out_dim")?;
    w.u8(tag_of(GATING_TAGS, config.gating_kind));
    w.u8(tag_of(GATE_ACT_TAGS, config.gate_activation));
    w.u8(tag_of(NONLIN_TAGS, config.nonlinearity));
    w.u8(tag_of(FILTER_TAGS, config.filter_kind));
    w.u8(tag_of(CONV_MODE_TAGS, config.filter_mode));
    w.u8(tag_of(POOLING_TAGS, config.pooling));
    w.usize32(config.kernel_size, "kernel_size")?;
    w.u64(config.seed);

    w.u8(tag_of(TASK_TAGS, meta.task));
    w.usize32(meta.stride, "stride")?;
    let n = u16::try_from(meta.feature_names.len())
        .map_err(|_| ModelFileError::TooLarge("channel count"))?;
    w.u16(n);
    for name in &meta.feature_names {
        w.str16(name, "channel name")?;
    }
    w.str16(&meta.target_name, "target name")?;
    w.u16(match meta.target_channel {
        Some(c) => {
            u16::try_from(c).map_err(|_| ModelFileError::TooLarge("target channel"))?
        }
        None => NO_TARGET_CHANNEL,
    });
    for c in 0..meta.normalizer.cols() {
        w.f64(meta.normalizer.mean(c));
    }
    for c in 0..meta.normalizer.cols() {
        w.f64(meta.normalizer.std(c));
    }

    let named = params.named();
    let count =
        u16::try_from(named.len()).map_err(|_| ModelFileError::TooLarge("blob count"))?;
    w.u16(count);
    for (_, t) in named {
        let rank =
            u8::try_from(t.shape().len()).map_err(|_| ModelFileError::TooLarge("tensor rank"))?;
        w.u8(rank);
        for &d in t.shape() {
            w.usize32(d, "tensor dimension")?;
        }
        for &v in t.data() {
            w.f64(v);
        }
    }

    let crc = crc32fast::hash(&w.bytes);
    w.u32(crc);
    Ok(w.bytes)
}

// --- decoding ---------------------------------------------------------------

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ModelFileError::Malformed("truncated record".to_string()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }
    fn u8(&mut self) -> Result<u8, ModelFileError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, ModelFileError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, ModelFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, ModelFileError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, ModelFileError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str16(&mut self) -> Result<String, ModelFileError> {
        let len = self.u16()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| ModelFileError::Malformed("name is not UTF-8".to_string()))
    }
}

/// Parse a model from its byte form. The checksum is verified first.
pub fn decode_model(bytes: &[u8]) -> Result<SavedModel, ModelFileError> {
    if bytes.len() < MAGIC.len() + 2 + 4 {
        return Err(ModelFileError::Malformed("file too short".to_string()));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(ModelFileError::ChecksumMismatch);
    }
    let mut r = Reader {
        bytes: body,
        pos: 0,
    };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(ModelFileError::UnsupportedVersion(version));
    }

    let in_channels = r.u32()? as usize;
    let seq_len = r.u32()? as usize;
    let model_dim = r.u32()? as usize;
    let out_dim = r.u32()? as usize;
    let gating_kind = from_tag(GATING_TAGS, r.u8()?, "gating")?;
    let gate_activation = from_tag(GATE_ACT_TAGS, r.u8()?, "gate activation")?;
    let nonlinearity = from_tag(NONLIN_TAGS, r.u8()?, "nonlinearity")?;
    let filter_kind = from_tag(FILTER_TAGS, r.u8()?, "filter")?;
    let filter_mode = from_tag(CONV_MODE_TAGS, r.u8()?, "filter mode")?;
    let pooling = from_tag(POOLING_TAGS, r.u8()?, "pooling")?;
    let kernel_size = r.u32()? as usize;
    let seed = r.u64()?;
    let config = CuraConfig {
        in_channels,
        seq_len,
        model_dim,
        out_dim,
        gating_kind,
        gate_activation,
        nonlinearity,
        filter_kind,
        filter_mode,
        kernel_size,
        pooling,
        seed,
    };
    config
        .validate()
        .map_err(|e| ModelFileError::Malformed(e.to_string()))?;

    let task = from_tag(TASK_TAGS, r.u8()?, "task")?;
    let stride = r.u32()? as usize;
    if stride == 0 {
        return Err(ModelFileError::Malformed("stride must be positive".to_string()));
    }
    let n = r.u16()? as usize;
    if n != config.in_channels {
        return Err(ModelFileError::Malformed(format!(
            "{n} channel names for {} input channels",
            config.in_channels
        )));
    }
    let mut feature_names = Vec::with_capacity(n);
    for _ in 0..n {
        feature_names.push(r.str16()?);
    }
    let target_name = r.str16()?;
    let target_channel = match r.u16()? {
        NO_TARGET_CHANNEL => None,
        c => Some(c as usize),
    };
    match (task, target_channel) {
        (Task::Forecast, Some(c)) if c < n => {}
        (Task::Classify, None) => {}
        _ => {
            return Err(ModelFileError::Malformed(
                "target channel does not fit the task".to_string(),
            ))
        }
    }
    let mut mean = Vec::with_capacity(n);
    for _ in 0..n {
        mean.push(r.f64()?);
    }
    let mut std = Vec::with_capacity(n);
    for _ in 0..n {
        std.push(r.f64()?);
    }
    let normalizer = Normalizer::from_stats(mean, std)
        .map_err(|e| ModelFileError::Malformed(e.to_string()))?;

    // The blobs must match the canonical parameter skeleton of this exact
    // configuration — count, order and shapes.
    let mut params = init_params(&config, config.seed)
        .map_err(|e| ModelFileError::Malformed(e.to_string()))?;
    let mut named = params.named_mut();
    let count = r.u16()? as usize;
    if count != named.len() {
        return Err(ModelFileError::Malformed(format!(
            "{count} parameter blobs where the configuration demands {}",
            named.len()
        )));
    }
    for (name, tensor) in named.iter_mut() {
        let rank = r.u8()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        if dims != tensor.shape() {
            return Err(ModelFileError::Malformed(format!(
                "blob `{name}` has shape {dims:?}, expected {:?}",
                tensor.shape()
            )));
        }
        for v in tensor.data_mut() {
            *v = r.f64()?;
        }
    }
    if r.pos != body.len() {
        return Err(ModelFileError::Malformed(format!(
            "{} trailing bytes",
            body.len() - r.pos
        )));
    }

    Ok(SavedModel {
        config,
        params,
        meta: PipelineMeta {
            task,
            stride,
            feature_names,
            target_name,
            target_channel,
            normalizer,
        },
    })
}

pub fn save_model(path: &Path, model: &SavedModel) -> Result<(), ModelFileError> {
    Ok(std::fs::write(path, encode_model(model)?)?)
}

pub fn load_model(path: &Path) -> Result<SavedModel, ModelFileError> {
    decode_model(&std::fs::read(path)?)
}
