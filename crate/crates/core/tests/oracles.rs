//! Hand-computed numeric pins that cross module boundaries: parameter
//! counts per ablation variant, algebraic identities of the gated
//! combination, the gate's modulation band, and the efficiency audit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cura_core::{
    audit_reference_efficiency, count_params, cura_forward, gating_forward, init_params,
    residual_forward, residual_gate_combine, ConvMode, CuraConfig, FilterKind, GateActivation,
    GatingKind, Nonlinearity, Tensor,
};

/// The eight one-axis-at-a-time ablation variants of a base config.
fn ablation_variants(base: &CuraConfig) -> Vec<(&'static str, CuraConfig)> {
    let mut variants = vec![("default", base.clone())];
    let mut c = base.clone();
    c.gating_kind = GatingKind::Linear;
    variants.push(("linear-gating", c));
    let mut c = base.clone();
    c.gating_kind = GatingKind::Convolutional;
    variants.push(("conv-gating", c));
    let mut c = base.clone();
    c.gate_activation = GateActivation::HardSigmoid;
    variants.push(("hard-sigmoid", c));
    let mut c = base.clone();
    c.nonlinearity = Nonlinearity::Gelu;
    variants.push(("gelu", c));
    let mut c = base.clone();
    c.nonlinearity = Nonlinearity::TanhConv;
    variants.push(("tanh-conv", c));
    let mut c = base.clone();
    c.filter_kind = FilterKind::Linear1x1;
    variants.push(("linear-1x1", c));
    let mut c = base.clone();
    c.filter_kind = FilterKind::None;
    variants.push(("no-filter", c));
    variants
}

#[test]
fn parameter_counts_match_hand_arithmetic_per_variant() {
    // base: C=3, D=24, k=3 depthwise, H=6
    // gate 3*24+24 = 96, residual 96, nonlinear 24*24+24 = 600,
    // filter 3*24+24 = 96, output 24*6+6 = 150 -> 1038
    let base = CuraConfig::canonical(3, 32, 24, 6);
    let expected: &[(&str, usize)] = &[
        ("default", 1038),
        ("linear-gating", 1038),
        // + gate conv 3*24+24
        ("conv-gating", 1134),
        ("hard-sigmoid", 1038),
        ("gelu", 1038),
        // + nonlinearity conv 3*24+24
        ("tanh-conv", 1134),
        // filter becomes 24*24+24 = 600 instead of 96
        ("linear-1x1", 1542),
        // filter drops entirely
        ("no-filter", 942),
    ];
    for ((name, config), (ename, count)) in ablation_variants(&base).iter().zip(expected) {
        assert_eq!(name, ename);
        assert_eq!(count_params(config), *count, "variant {name}");
        assert_eq!(
            init_params(config, 1).unwrap().total_elements(),
            *count,
            "initialized element count for {name}"
        );
    }
}

#[test]
fn full_filter_mode_pays_the_dense_kernel() {
    // depthwise filter on C=1, D=8, k=3, H=1: 145 total
    let config = CuraConfig::canonical(1, 20, 8, 1);
    assert_eq!(count_params(&config), 145);
    // full mode swaps 3*8+8=32 for 3*8*8+8=200
    let mut full = config;
    full.filter_mode = ConvMode::Full;
    assert_eq!(count_params(&full), 145 - 32 + 200);
}

#[test]
fn zero_weights_reduce_every_variant_to_its_output_bias() {
    let base = CuraConfig::canonical(2, 6, 4, 2);
    for (name, config) in ablation_variants(&base) {
        let mut params = init_params(&config, 3).unwrap();
        for (_, t) in params.named_mut() {
            for v in t.data_mut() {
                *v = 0.0;
            }
        }
        params.b_o = Tensor::vector(vec![0.5, -1.5]).unwrap();
        let x = Tensor::matrix(6, 2, (0..12).map(|i| (i as f64).sin()).collect()).unwrap();
        let y = cura_forward(&x, &params, &config).unwrap();
        assert_eq!(y.data(), &[0.5, -1.5], "variant {name}");
    }
}

#[test]
fn gated_combination_identity_over_a_thousand_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        // g in the gate's output band, r in a generous residual range
        let g: f64 = rng.random::<f64>();
        let r: f64 = 200.0 * rng.random::<f64>() - 100.0;
        let lhs = g * r + r;
        let rhs = r * (g + 1.0);
        worst = worst.max((lhs - rhs).abs());
    }
    assert!(worst <= 1e-12, "worst deviation {worst:.3e}");
}

#[test]
fn tensor_form_of_the_identity_matches_too() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let g = Tensor::matrix(20, 5, (0..100).map(|_| rng.random::<f64>()).collect()).unwrap();
    let r = Tensor::matrix(20, 5, (0..100).map(|_| 20.0 * rng.random::<f64>() - 10.0).collect())
        .unwrap();
    let h1 = residual_gate_combine(&g, &r).unwrap();
    for i in 0..100 {
        let expect = r.data()[i] * (g.data()[i] + 1.0);
        assert!((h1.data()[i] - expect).abs() <= 1e-12);
    }
}

#[test]
fn sigmoid_gate_modulates_strictly_inside_one_to_two() {
    let config = CuraConfig::canonical(2, 50, 6, 1);
    let params = init_params(&config, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    // stress with large inputs so gate pre-activations reach saturation
    let x = Tensor::matrix(
        50,
        2,
        (0..100).map(|_| 2000.0 * rng.random::<f64>() - 1000.0).collect(),
    )
    .unwrap();
    let g = gating_forward(&x, &params, &config).unwrap();
    let r = residual_forward(&x, &params).unwrap();
    let h1 = residual_gate_combine(&g, &r).unwrap();
    let mut checked = 0;
    for i in 0..h1.numel() {
        let rv = r.data()[i];
        if rv != 0.0 {
            let ratio = h1.data()[i] / rv;
            assert!(ratio > 1.0 && ratio < 2.0, "ratio {ratio} escaped (1, 2)");
            checked += 1;
        }
    }
    assert!(checked > 250);
}

#[test]
fn footnote_combination_case_is_exact() {
    let g = Tensor::scalar(0.1);
    let r = Tensor::scalar(0.05);
    let h1 = residual_gate_combine(&g, &r).unwrap();
    // 0.1 * 0.05 + 0.05 lands within one ulp of the 0.055 literal
    assert!((h1.item() - 0.055).abs() <= f64::EPSILON);
}

#[test]
fn efficiency_audit_verifies_the_reference_grid() {
    let audits = audit_reference_efficiency();
    assert_eq!(audits.len(), 25);

    // spot-check the two quoted regression baselines
    let gru_sp = audits
        .iter()
        .find(|a| a.row.dataset == "S&P 500" && a.row.model == "GRU")
        .unwrap();
    assert!((gru_sp.exact - 0.0216615).abs() < 1e-6);
    assert!(gru_sp.consistent);
    let tsm_sp = audits
        .iter()
        .find(|a| a.row.dataset == "S&P 500" && a.row.model == "TSMixer")
        .unwrap();
    assert!((tsm_sp.exact - 0.0277545).abs() < 1e-6);
    assert!(tsm_sp.consistent);

    // at least three baseline (non-CURA) rows check out at printed precision
    let consistent_baselines = audits
        .iter()
        .filter(|a| a.row.model != "CURA" && a.consistent)
        .count();
    assert!(consistent_baselines >= 3);

    // the flagged discrepancies, by exact quotient
    let cura_sp = audits
        .iter()
        .find(|a| a.row.dataset == "S&P 500" && a.row.model == "CURA")
        .unwrap();
    assert!((cura_sp.exact - 0.132707).abs() < 1e-6);
    assert!(!cura_sp.consistent, "99.0/746 cannot round to 0.130");
}
