//! The gated residual sequence core and its ablation variants.
//!
//! Five units compose the forward map: a gating unit g = sigma(X W_g + b_g),
//! a residual path r = X W_r + b_r, the combination h1 = g (.) r + r, a
//! pointwise nonlinear stage h2 = phi(h1 W_n + b_n), a length-axis filter
//! h3 = F(h2), and an output projection y = pool(h3) W_o + b_o. All linear
//! units act independently per time step; only the filter mixes along the
//! sequence, which keeps parameter counts independent of sequence length.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ConfigError, TensorError};
use crate::tape::Tape;
use crate::tensor::{Activation, ConvMode, Tensor};

/// How the gate pre-activation is produced and squashed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatingKind {
    /// Affine map followed by the gate activation (default).
    Multiplicative,
    /// Unsquashed affine map; the gate activation is omitted.
    Linear,
    /// Depthwise k=3 convolution over the affine map, then the activation.
    Convolutional,
}

/// Squashing function of the gating unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateActivation {
    Sigmoid,
    HardSigmoid,
}

/// Pointwise nonlinearity of the middle stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    Relu,
    Gelu,
    /// tanh followed by a depthwise convolution with its own weights.
    TanhConv,
}

/// Filtering stage along the sequence axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    /// Same-padded convolution, depthwise or full per `filter_mode`.
    Conv1d,
    /// Position-wise D x D map plus bias (a 1x1 convolution).
    Linear1x1,
    /// Identity.
    None,
}

/// How the sequence axis collapses before the output projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    /// Mean over positions (default).
    Mean,
    /// Last position only; intended for autoregressive forecasting.
    Last,
}

/// Kernel width of the convolutional gating variant (fixed by design).
pub const GATE_CONV_KERNEL: usize = 3;

/// Complete architectural description of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct CuraConfig {
    pub in_channels: usize,
    /// Sequence length; 1 denotes tabular mode.
    pub seq_len: usize,
    pub model_dim: usize,
    pub out_dim: usize,
    pub gating_kind: GatingKind,
    pub gate_activation: GateActivation,
    pub nonlinearity: Nonlinearity,
    pub filter_kind: FilterKind,
    pub filter_mode: ConvMode,
    pub kernel_size: usize,
    pub pooling: Pooling,
    pub seed: u64,
}

impl CuraConfig {
    /// The canonical default configuration: multiplicative sigmoid gating,
    /// relu nonlinearity, depthwise k=3 convolution filter, mean pooling.
    pub fn canonical(in_channels: usize, seq_len: usize, model_dim: usize, out_dim: usize) -> CuraConfig {
        CuraConfig {
            in_channels,
            seq_len,
            model_dim,
            out_dim,
            gating_kind: GatingKind::Multiplicative,
            gate_activation: GateActivation::Sigmoid,
            nonlinearity: Nonlinearity::Relu,
            filter_kind: FilterKind::Conv1d,
            filter_mode: ConvMode::Depthwise,
            kernel_size: 3,
            pooling: Pooling::Mean,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(name: &'static str, v: usize) -> Result<(), ConfigError> {
            if v == 0 {
                return Err(ConfigError::Field {
                    name,
                    why: "must be positive".to_string(),
                });
            }
            Ok(())
        }
        positive("in_channels", self.in_channels)?;
        positive("seq_len", self.seq_len)?;
        positive("model_dim", self.model_dim)?;
        positive("out_dim", self.out_dim)?;
        positive("kernel_size", self.kernel_size)?;
        Ok(())
    }
}

/// One convolution's learnable state: kernel plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub kernel: Tensor,
    pub bias: Tensor,
}

/// All learnable tensors of one model.
///
/// Canonical parameter order — used for initialization draws, optimizer
/// state and serialization alike — is: W_g, b_g, W_r, b_r, W_n, b_n,
/// filter kernel+bias, gate-conv kernel+bias, nonlinearity-conv
/// kernel+bias, W_o, b_o (optional groups present only when the config
/// demands them).
#[derive(Debug, Clone, PartialEq)]
pub struct CuraParams {
    pub w_g: Tensor,
    pub b_g: Tensor,
    pub w_r: Tensor,
    pub b_r: Tensor,
    pub w_n: Tensor,
    pub b_n: Tensor,
    /// Filter weights when `filter_kind` is `Conv1d` or `Linear1x1`.
    pub filter: Option<ConvParams>,
    /// Gate convolution weights when `gating_kind` is `Convolutional`.
    pub gate_conv: Option<ConvParams>,
    /// Extra convolution weights when `nonlinearity` is `TanhConv`.
    pub nonlin_conv: Option<ConvParams>,
    pub w_o: Tensor,
    pub b_o: Tensor,
}

impl CuraParams {
    /// Tensors with their canonical names, in canonical order.
    pub fn named(&self) -> Vec<(&'static str, &Tensor)> {
        let mut out = vec![
            ("W_g", &self.w_g),
            ("b_g", &self.b_g),
            ("W_r", &self.w_r),
            ("b_r", &self.b_r),
            ("W_n", &self.w_n),
            ("b_n", &self.b_n),
        ];
        if let Some(f) = &self.filter {
            out.push(("theta_f_kernel", &f.kernel));
            out.push(("theta_f_bias", &f.bias));
        }
        if let Some(g) = &self.gate_conv {
            out.push(("theta_g_kernel", &g.kernel));
            out.push(("theta_g_bias", &g.bias));
        }
        if let Some(n) = &self.nonlin_conv {
            out.push(("theta_n_kernel", &n.kernel));
            out.push(("theta_n_bias", &n.bias));
        }
        out.push(("W_o", &self.w_o));
        out.push(("b_o", &self.b_o));
        out
    }

    /// Mutable view in canonical order.
    pub fn named_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut out = vec![
            ("W_g", &mut self.w_g),
            ("b_g", &mut self.b_g),
            ("W_r", &mut self.w_r),
            ("b_r", &mut self.b_r),
            ("W_n", &mut self.w_n),
            ("b_n", &mut self.b_n),
        ];
        if let Some(f) = &mut self.filter {
            out.push(("theta_f_kernel", &mut f.kernel));
            out.push(("theta_f_bias", &mut f.bias));
        }
        if let Some(g) = &mut self.gate_conv {
            out.push(("theta_g_kernel", &mut g.kernel));
            out.push(("theta_g_bias", &mut g.bias));
        }
        if let Some(n) = &mut self.nonlin_conv {
            out.push(("theta_n_kernel", &mut n.kernel));
            out.push(("theta_n_bias", &mut n.bias));
        }
        out.push(("W_o", &mut self.w_o));
        out.push(("b_o", &mut self.b_o));
        out
    }

    /// Total learnable scalar count.
    pub fn total_elements(&self) -> usize {
        self.named().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Copy of the parameters registered as differentiable leaves of `tape`.
    pub fn traced(&self, tape: &Tape) -> CuraParams {
        let trace_conv = |c: &Option<ConvParams>| {
            c.as_ref().map(|c| ConvParams {
                kernel: tape.leaf(&c.kernel),
                bias: tape.leaf(&c.bias),
            })
        };
        CuraParams {
            w_g: tape.leaf(&self.w_g),
            b_g: tape.leaf(&self.b_g),
            w_r: tape.leaf(&self.w_r),
            b_r: tape.leaf(&self.b_r),
            w_n: tape.leaf(&self.w_n),
            b_n: tape.leaf(&self.b_n),
            filter: trace_conv(&self.filter),
            gate_conv: trace_conv(&self.gate_conv),
            nonlin_conv: trace_conv(&self.nonlin_conv),
            w_o: tape.leaf(&self.w_o),
            b_o: tape.leaf(&self.b_o),
        }
    }
}

fn glorot(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let numel: usize = shape.iter().product();
    let data = (0..numel)
        .map(|_| limit * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    Tensor::new(shape, data).expect("init shapes are consistent")
}

/// Filter weight shape implied by the config, if the config has a filter.
fn filter_spec(config: &CuraConfig) -> Option<(Vec<usize>, usize, usize, ConvMode)> {
    let d = config.model_dim;
    match config.filter_kind {
        FilterKind::Conv1d => match config.filter_mode {
            ConvMode::Depthwise => Some((
                vec![config.kernel_size, d],
                config.kernel_size,
                config.kernel_size,
                ConvMode::Depthwise,
            )),
            ConvMode::Full => Some((
                vec![config.kernel_size, d, d],
                config.kernel_size * d,
                config.kernel_size * d,
                ConvMode::Full,
            )),
        },
        // a 1x1 full convolution: position-wise D x D map
        FilterKind::Linear1x1 => Some((vec![1, d, d], d, d, ConvMode::Full)),
        FilterKind::None => None,
    }
}

/// Draw fresh parameters: weights uniform in +/- sqrt(6 / (fan_in + fan_out)),
/// biases exactly zero, deterministic under the seed.
///
/// Draws happen in canonical parameter order; biases consume no draws.
pub fn init_params(config: &CuraConfig, seed: u64) -> Result<CuraParams, ConfigError> {
    config.validate()?;
    let (c, d, h) = (config.in_channels, config.model_dim, config.out_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let w_g = glorot(&mut rng, vec![c, d], c, d);
    let w_r = glorot(&mut rng, vec![c, d], c, d);
    let w_n = glorot(&mut rng, vec![d, d], d, d);
    let filter = filter_spec(config).map(|(shape, fan_in, fan_out, _)| ConvParams {
        kernel: glorot(&mut rng, shape, fan_in, fan_out),
        bias: Tensor::zeros(vec![d]),
    });
    let gate_conv = match config.gating_kind {
        GatingKind::Convolutional => Some(ConvParams {
            kernel: glorot(
                &mut rng,
                vec![GATE_CONV_KERNEL, d],
                GATE_CONV_KERNEL,
                GATE_CONV_KERNEL,
            ),
            bias: Tensor::zeros(vec![d]),
        }),
        _ => None,
    };
    let nonlin_conv = match config.nonlinearity {
        Nonlinearity::TanhConv => Some(ConvParams {
            kernel: glorot(
                &mut rng,
                vec![config.kernel_size, d],
                config.kernel_size,
                config.kernel_size,
            ),
            bias: Tensor::zeros(vec![d]),
        }),
        _ => None,
    };
    let w_o = glorot(&mut rng, vec![d, h], d, h);

    Ok(CuraParams {
        w_g,
        b_g: Tensor::zeros(vec![d]),
        w_r,
        b_r: Tensor::zeros(vec![d]),
        w_n,
        b_n: Tensor::zeros(vec![d]),
        filter,
        gate_conv,
        nonlin_conv,
        w_o,
        b_o: Tensor::zeros(vec![h]),
    })
}

/// Exact learnable-scalar count implied by a config, computed arithmetically
/// (independently of `init_params`).
pub fn count_params(config: &CuraConfig) -> usize {
    let (c, d, h, k) = (
        config.in_channels,
        config.model_dim,
        config.out_dim,
        config.kernel_size,
    );
    let gate = c * d + d;
    let residual = c * d + d;
    let nonlinear = d * d + d;
    let filter = match config.filter_kind {
        FilterKind::Conv1d => match config.filter_mode {
            ConvMode::Depthwise => k * d + d,
            ConvMode::Full => k * d * d + d,
        },
        FilterKind::Linear1x1 => d * d + d,
        FilterKind::None => 0,
    };
    let gate_extra = match config.gating_kind {
        GatingKind::Convolutional => GATE_CONV_KERNEL * d + d,
        _ => 0,
    };
    let nonlin_extra = match config.nonlinearity {
        Nonlinearity::TanhConv => k * d + d,
        _ => 0,
    };
    let output = d * h + h;
    gate + residual + nonlinear + filter + gate_extra + nonlin_extra + output
}

fn missing(op: &'static str, what: &str) -> TensorError {
    TensorError::BadParameter {
        op,
        what: format!("config requires {what} parameters but none are present"),
    }
}

fn gate_activation(config: &CuraConfig) -> Activation {
    match config.gate_activation {
        GateActivation::Sigmoid => Activation::Sigmoid,
        GateActivation::HardSigmoid => Activation::HardSigmoid,
    }
}

// --- traced unit bodies -------------------------------------------------
//
// Each takes the recording tape plus a segment length so batched inputs
// (stacked windows) can flow through the same code; the public single-window
// functions below are the seg_len == rows case on a throwaway tape.

pub(crate) fn gating_forward_seg(
    tape: &Tape,
    x: &Tensor,
    params: &CuraParams,
    config: &CuraConfig,
    seg_len: usize,
) -> Result<Tensor, TensorError> {
    let pre = tape.add_row(&tape.matmul(x, &params.w_g)?, &params.b_g)?;
    match config.gating_kind {
        GatingKind::Multiplicative => tape.activation(gate_activation(config), &pre),
        GatingKind::Linear => Ok(pre),
        GatingKind::Convolutional => {
            let gc = params
                .gate_conv
                .as_ref()
                .ok_or_else(|| missing("gating_forward", "gate convolution"))?;
            let mixed = tape.conv1d_seg(&pre, &gc.kernel, &gc.bias, ConvMode::Depthwise, seg_len)?;
            tape.activation(gate_activation(config), &mixed)
        }
    }
}

pub(crate) fn residual_forward_seg(
    tape: &Tape,
    x: &Tensor,
    params: &CuraParams,
) -> Result<Tensor, TensorError> {
    tape.add_row(&tape.matmul(x, &params.w_r)?, &params.b_r)
}

pub(crate) fn residual_gate_combine_seg(
    tape: &Tape,
    g: &Tensor,
    r: &Tensor,
) -> Result<Tensor, TensorError> {
    tape.add(&tape.hadamard(g, r)?, r)
}

pub(crate) fn nonlinear_unit_seg(
    tape: &Tape,
    h1: &Tensor,
    params: &CuraParams,
    config: &CuraConfig,
    seg_len: usize,
) -> Result<Tensor, TensorError> {
    let pre = tape.add_row(&tape.matmul(h1, &params.w_n)?, &params.b_n)?;
    match config.nonlinearity {
        Nonlinearity::Relu => tape.activation(Activation::Relu, &pre),
        Nonlinearity::Gelu => tape.activation(Activation::Gelu, &pre),
        Nonlinearity::TanhConv => {
            let nc = params
                .nonlin_conv
                .as_ref()
                .ok_or_else(|| missing("nonlinear_unit", "nonlinearity convolution"))?;
            let t = tape.activation(Activation::Tanh, &pre)?;
            tape.conv1d_seg(&t, &nc.kernel, &nc.bias, ConvMode::Depthwise, seg_len)
        }
    }
}

pub(crate) fn filter_unit_seg(
    tape: &Tape,
    h2: &Tensor,
    params: &CuraParams,
    config: &CuraConfig,
    seg_len: usize,
) -> Result<Tensor, TensorError> {
    match config.filter_kind {
        FilterKind::None => Ok(h2.clone()),
        FilterKind::Conv1d | FilterKind::Linear1x1 => {
            let f = params
                .filter
                .as_ref()
                .ok_or_else(|| missing("filter_unit", "filter"))?;
            let mode = match config.filter_kind {
                FilterKind::Conv1d => config.filter_mode,
                _ => ConvMode::Full,
            };
            tape.conv1d_seg(h2, &f.kernel, &f.bias, mode, seg_len)
        }
    }
}

pub(crate) fn output_projection_seg(
    tape: &Tape,
    h3: &Tensor,
    params: &CuraParams,
    config: &CuraConfig,
    seg_len: usize,
) -> Result<Tensor, TensorError> {
    let pooled = match config.pooling {
        Pooling::Mean => tape.pool_mean_seg(h3, seg_len)?,
        Pooling::Last => tape.pool_last_seg(h3, seg_len)?,
    };
    tape.add_row(&tape.matmul(&pooled, &params.w_o)?, &params.b_o)
}

/// Full composition on a tape; `x` stacks whole windows of `seg_len` rows,
/// the result has one row per window.
pub fn cura_forward_batch(
    tape: &Tape,
    x: &Tensor,
    params: &CuraParams,
    config: &CuraConfig,
    seg_len: usize,
) -> Result<Tensor, TensorError> {
    if x.cols() != config.in_channels {
        return Err(TensorError::ShapeMismatch {
            op: "cura_forward",
            left: x.shape().to_vec(),
            right: vec![seg_len, config.in_channels],
        });
    }
    let g = gating_forward_seg(tape, x, params, config, seg_len)?;
    let r = residual_forward_seg(tape, x, params)?;
    let h1 = residual_gate_combine_seg(tape, &g, &r)?;
    let h2 = nonlinear_unit_seg(tape, &h1, params, config, seg_len)?;
    let h3 = filter_unit_seg(tape, &h2, params, config, seg_len)?;
    output_projection_seg(tape, &h3, params, config, seg_len)
}

// --- public single-window units ------------------------------------------
//
// Untraced convenience forms. Each runs the traced body on a throwaway tape
// so there is exactly one numeric implementation of every unit.

/// Gating unit: g = sigma(X W_g + b_g) (variant-dependent, see `GatingKind`).
pub fn gating_forward(
    x: &Tensor,
    params: &CuraParams,
    config: &CuraConfig,
) -> Result<Tensor, TensorError> {
    let tape = Tape::new();
    let rows = x.rows();
    gating_forward_seg(&tape, x, params, config, rows).map(Tensor::detach)
}

/// Residual path: r = X W_r + b_r, independently per time step.
pub fn residual_forward(x: &Tensor, params: &CuraParams) -> Result<Tensor, TensorError> {
    let tape = Tape::new();
    residual_forward_seg(&tape, x, params).map(Tensor::detach)
}

/// Gated combination h1 = g (.) r + r, identical to r (.) (g + 1).
pub fn residual_gate_combine(g: &Tensor, r: &Tensor) -> Result<Tensor, TensorError> {
    let tape = Tape::new();
    residual_gate_combine_seg(&tape, g, r).map(Tensor::detach)
}

/// Nonlinear stage h2 = phi(h1 W_n + b_n) (variant-dependent).
pub fn nonlinear_unit(
    h1: &Tensor,
    params: &CuraParams,
    config: &CuraConfig,
) -> Result<Tensor, TensorError> {
    let tape = Tape::new();
    let rows = h1.rows();
    nonlinear_unit_seg(&tape, h1, params, config, rows).map(Tensor::detach)
}

/// Filtering stage h3 = F(h2) along the sequence axis.
pub fn filter_unit(
    h2: &Tensor,
    params: &CuraParams,
    config: &CuraConfig,
) -> Result<Tensor, TensorError> {
    let tape = Tape::new();
    let rows = h2.rows();
    filter_unit_seg(&tape, h2, params, config, rows).map(Tensor::detach)
}

/// Output projection y = pool(h3) W_o + b_o, returned as a 1 x H row.
pub fn output_projection(
    h3: &Tensor,
    params: &CuraParams,
    config: &CuraConfig,
) -> Result<Tensor, TensorError> {
    let tape = Tape::new();
    let rows = h3.rows();
    output_projection_seg(&tape, h3, params, config, rows).map(Tensor::detach)
}

/// Full forward map for one `seq_len x in_channels` window, as a 1 x H row.
pub fn cura_forward(
    x: &Tensor,
    params: &CuraParams,
    config: &CuraConfig,
) -> Result<Tensor, TensorError> {
    if x.rows() != config.seq_len {
        return Err(TensorError::ShapeMismatch {
            op: "cura_forward",
            left: x.shape().to_vec(),
            right: vec![config.seq_len, config.in_channels],
        });
    }
    let tape = Tape::new();
    cura_forward_batch(&tape, x, params, config, config.seq_len).map(Tensor::detach)
}
