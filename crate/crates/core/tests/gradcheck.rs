//! Every backward rule, checked against central finite differences across
//! the whole variant grid.

use std::time::Instant;

use cura_core::{
    max_grad_rel_err, CheckLoss, ConvMode, CuraConfig, FilterKind, GateActivation, GatingKind,
    Nonlinearity, Pooling,
};

const TOLERANCE: f64 = 1e-4;

fn base(c: usize, l: usize, d: usize, h: usize) -> CuraConfig {
    CuraConfig::canonical(c, l, d, h)
}

/// One config per variant-axis value, plus dimension extremes: kernel sizes
/// 1/3/5, window lengths down to the tabular case, multi-channel and
/// multi-horizon shapes, both pooling modes.
fn variant_grid() -> Vec<(&'static str, CuraConfig, usize)> {
    let mut cases: Vec<(&'static str, CuraConfig, usize)> = Vec::new();

    cases.push(("default", base(1, 4, 3, 1), 2));
    cases.push(("wide-default", base(4, 8, 8, 3), 2));

    let mut c = base(2, 5, 4, 1);
    c.gating_kind = GatingKind::Linear;
    cases.push(("linear-gating", c, 2));

    let mut c = base(2, 6, 3, 2);
    c.gating_kind = GatingKind::Convolutional;
    cases.push(("conv-gating", c, 2));

    let mut c = base(1, 5, 4, 1);
    c.gate_activation = GateActivation::HardSigmoid;
    cases.push(("hard-sigmoid-gate", c, 3));

    let mut c = base(3, 4, 4, 2);
    c.nonlinearity = Nonlinearity::Gelu;
    cases.push(("gelu", c, 2));

    let mut c = base(2, 6, 4, 1);
    c.nonlinearity = Nonlinearity::TanhConv;
    cases.push(("tanh-conv", c, 2));

    let mut c = base(2, 5, 4, 2);
    c.filter_mode = ConvMode::Full;
    cases.push(("full-filter", c, 2));

    let mut c = base(1, 6, 5, 1);
    c.filter_kind = FilterKind::Linear1x1;
    cases.push(("linear-1x1-filter", c, 2));

    let mut c = base(2, 4, 3, 1);
    c.filter_kind = FilterKind::None;
    cases.push(("no-filter", c, 2));

    let mut c = base(1, 5, 3, 1);
    c.kernel_size = 1;
    cases.push(("kernel-1", c, 2));

    let mut c = base(2, 7, 4, 1);
    c.kernel_size = 5;
    cases.push(("kernel-5", c, 2));

    let mut c = base(2, 3, 4, 1);
    c.kernel_size = 5;
    cases.push(("kernel-wider-than-window", c, 2));

    let mut c = base(3, 1, 4, 2);
    c.kernel_size = 1;
    cases.push(("tabular-window-1", c, 3));

    let mut c = base(1, 8, 4, 1);
    c.pooling = Pooling::Last;
    cases.push(("last-pooling", c, 2));

    let mut c = base(2, 5, 4, 3);
    c.pooling = Pooling::Last;
    c.gating_kind = GatingKind::Convolutional;
    c.nonlinearity = Nonlinearity::TanhConv;
    cases.push(("conv-gate-tanh-conv-last", c, 2));

    let mut c = base(4, 6, 6, 2);
    c.gate_activation = GateActivation::HardSigmoid;
    c.filter_mode = ConvMode::Full;
    c.kernel_size = 5;
    cases.push(("hard-sigmoid-full-k5", c, 1));

    let mut c = base(1, 2, 2, 1);
    c.filter_kind = FilterKind::None;
    c.gating_kind = GatingKind::Linear;
    cases.push(("smallest", c, 1));

    let mut c = base(2, 8, 5, 2);
    c.nonlinearity = Nonlinearity::Gelu;
    c.gating_kind = GatingKind::Convolutional;
    cases.push(("gelu-conv-gate", c, 2));

    let mut c = base(3, 6, 5, 1);
    c.filter_kind = FilterKind::Linear1x1;
    c.gate_activation = GateActivation::HardSigmoid;
    cases.push(("1x1-hard-sigmoid", c, 2));

    let mut c = base(1, 4, 8, 1);
    c.kernel_size = 3;
    c.pooling = Pooling::Last;
    c.nonlinearity = Nonlinearity::TanhConv;
    cases.push(("deep-tanh-conv-last", c, 2));

    let mut c = base(4, 5, 2, 1);
    c.gating_kind = GatingKind::Linear;
    c.nonlinearity = Nonlinearity::Gelu;
    c.filter_mode = ConvMode::Full;
    cases.push(("linear-gelu-full", c, 2));

    let mut c = base(2, 6, 4, 2);
    c.gating_kind = GatingKind::Convolutional;
    c.gate_activation = GateActivation::HardSigmoid;
    cases.push(("conv-gate-hard-sigmoid", c, 2));

    let mut c = base(1, 7, 3, 1);
    c.filter_kind = FilterKind::None;
    c.pooling = Pooling::Last;
    cases.push(("no-filter-last", c, 3));

    cases
}

#[test]
fn analytic_gradients_match_finite_differences_on_mse() {
    let start = Instant::now();
    let cases = variant_grid();
    assert!(cases.len() >= 20);
    for (i, (name, config, windows)) in cases.iter().enumerate() {
        let err = max_grad_rel_err(config, *windows, 1000 + i as u64, CheckLoss::Mse)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(
            err < TOLERANCE,
            "{name}: max relative gradient error {err:.3e}"
        );
    }
    assert!(
        start.elapsed().as_secs_f64() < 60.0,
        "gradient check exceeded its time budget"
    );
}

#[test]
fn analytic_gradients_match_finite_differences_on_cross_entropy() {
    for (i, (name, config, windows)) in variant_grid().into_iter().enumerate() {
        // classification heads need at least two logits
        let mut config = config;
        if config.out_dim < 2 {
            config.out_dim = 2;
        }
        let err = max_grad_rel_err(&config, windows.max(2), 2000 + i as u64, CheckLoss::CrossEntropy)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(
            err < TOLERANCE,
            "{name}: max relative gradient error {err:.3e}"
        );
    }
}

#[test]
fn gradients_are_deterministic_across_repeated_passes() {
    let config = base(2, 5, 4, 2);
    let a = max_grad_rel_err(&config, 2, 77, CheckLoss::Mse).unwrap();
    let b = max_grad_rel_err(&config, 2, 77, CheckLoss::Mse).unwrap();
    assert_eq!(a, b);
}
