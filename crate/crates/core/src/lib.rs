//! A self-contained kit for training and evaluating a compact gated
//! residual sequence model on time-series tasks.
//!
//! The pieces, bottom up:
//!
//! - [`tensor`]: dense 64-bit tensors and the numeric ops the model needs
//!   (matmul, Hadamard, same-padded 1-D convolution, pooling, activations).
//! - [`tape`]: reverse-mode automatic differentiation over those ops, giving
//!   exact gradients from a single recorded forward pass.
//! - [`model`]: the architecture — gate, residual path, gated combination,
//!   pointwise nonlinearity, sequence filter, output projection — plus its
//!   ablation variants, initialization, and parameter counting.
//! - [`optim`] / [`fit`]: Adam-AMSGrad with decoupled weight decay and a
//!   bit-reproducible seeded training loop.
//! - [`metrics`]: MSE/MAE/R^2, macro F1, stabilized cross-entropy, and the
//!   parameter-efficiency quotient with its reference-comparison audit.
//! - [`data`] / [`synth`]: CSV ingestion, leakage-free z-score
//!   normalization, sliding windows, chronological splits, and seeded
//!   synthetic series.
//!
//! Determinism is a design contract throughout: given equal configs, data
//! and seeds, initialization, batch order, training trajectories and
//! reports reproduce bit-for-bit.

pub mod check;
pub mod data;
pub mod error;
pub mod fit;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod synth;
pub mod tape;
pub mod tensor;

pub use check::{max_grad_rel_err, CheckLoss};
pub use data::{
    chrono_split, class_pipeline, forecast_pipeline, load_csv, make_class_windows, make_windows,
    normalized_series, split_label_column, window_count, zscore_apply, zscore_fit, zscore_invert,
    Normalizer, Series, Targets, WindowedDataset,
};
pub use error::{ConfigError, DataError, MetricError, TensorError, TrainError};
pub use fit::{argmax_rows, evaluate, fit, predict, EvalMetrics, TrainReport};
pub use metrics::{
    audit_reference_efficiency, cross_entropy, f1_macro, mae, mse, parameter_efficiency, r2_score,
    EfficiencyAudit, EfficiencyRow, REFERENCE_COMPARISONS,
};
pub use model::{
    count_params, cura_forward, cura_forward_batch, filter_unit, gating_forward, init_params,
    nonlinear_unit, output_projection, residual_forward, residual_gate_combine, ConvParams,
    CuraConfig, CuraParams, FilterKind, GateActivation, GatingKind, Nonlinearity, Pooling,
    GATE_CONV_KERNEL,
};
pub use optim::{adam_amsgrad_step, adam_step_slice, AdamSlot, AdamState, Hyperparams};
pub use synth::{gen_synth, SynthData, SynthKind};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::{Activation, ConvMode, Tensor};
