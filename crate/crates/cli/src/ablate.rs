//! The one-axis-at-a-time architecture sweep.
//!
//! Eight distinct variants: the canonical default plus every single-axis
//! departure from it (two alternative gatings, the hard gate activation,
//! two alternative nonlinearities, two alternative filters). The default
//! row stands in for all four default axis settings at once, which is what
//! keeps the sweep at eight rows instead of eleven.

use cura_core::{
    fit, ConvMode, CuraConfig, FilterKind, GateActivation, GatingKind, Hyperparams, Nonlinearity,
    TrainError, TrainReport, WindowedDataset,
};

/// One variant to train: its report name, the axis it departs on, and the
/// full configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSpec {
    pub name: &'static str,
    pub axis: &'static str,
    pub config: CuraConfig,
}

/// The sweep rows, in fixed order. Sizes, pooling and seed come from `base`;
/// the four variant axes always start from the canonical default, so the
/// table reads the same no matter how `base` is dressed.
pub fn ablation_variants(base: &CuraConfig) -> Vec<VariantSpec> {
    let mut default = base.clone();
    default.gating_kind = GatingKind::Multiplicative;
    default.gate_activation = GateActivation::Sigmoid;
    default.nonlinearity = Nonlinearity::Relu;
    default.filter_kind = FilterKind::Conv1d;
    default.filter_mode = ConvMode::Depthwise;

    let vary = |name, axis, change: fn(&mut CuraConfig)| {
        let mut config = default.clone();
        change(&mut config);
        VariantSpec { name, axis, config }
    };
    vec![
        VariantSpec {
            name: "default",
            axis: "baseline",
            config: default.clone(),
        },
        vary("linear_gate", "gating", |c| {
            c.gating_kind = GatingKind::Linear
        }),
        vary("conv_gate", "gating", |c| {
            c.gating_kind = GatingKind::Convolutional
        }),
        vary("hard_sigmoid", "gate_activation", |c| {
            c.gate_activation = GateActivation::HardSigmoid
        }),
        vary("gelu", "nonlinearity", |c| c.nonlinearity = Nonlinearity::Gelu),
        vary("tanh_conv", "nonlinearity", |c| {
            c.nonlinearity = Nonlinearity::TanhConv
        }),
        vary("linear_1x1", "filter", |c| {
            c.filter_kind = FilterKind::Linear1x1
        }),
        vary("no_filter", "filter", |c| c.filter_kind = FilterKind::None),
    ]
}

/// What one variant's training run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantOutcome {
    pub name: &'static str,
    pub axis: &'static str,
    pub report: TrainReport,
}

/// Train every variant on the same split, sequentially and in sweep order.
/// Each run is independently seeded from the shared hyperparameters, so the
/// whole sweep is reproducible end to end.
pub fn run_ablation(
    base: &CuraConfig,
    train: &WindowedDataset,
    test: &WindowedDataset,
    hyper: &Hyperparams,
) -> Result<Vec<VariantOutcome>, TrainError> {
    ablation_variants(base)
        .into_iter()
        .map(|spec| {
            let (_, report) = fit(&spec.config, train, test, hyper)?;
            Ok(VariantOutcome {
                name: spec.name,
                axis: spec.axis,
                report,
            })
        })
        .collect()
}

/// Outcome indices ranked by headline metric, best first; ties keep sweep
/// order (the sort is stable).
pub fn ranking(outcomes: &[VariantOutcome]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..outcomes.len()).collect();
    idx.sort_by(|&a, &b| {
        outcomes[b]
            .report
            .test_metrics
            .headline_pct()
            .total_cmp(&outcomes[a].report.test_metrics.headline_pct())
    });
    idx
}
