//! Randomized invariants: algebraic identities of the numeric kernel, the
//! gate's modulation band, metric symmetries, and the no-leakage guarantees
//! of the windowing pipeline.

use proptest::prelude::*;

use cura_core::{
    adam_step_slice, chrono_split, cura_forward, f1_macro, forecast_pipeline, init_params,
    make_windows, r2_score, window_count, zscore_apply, zscore_fit, zscore_invert, Activation,
    AdamSlot, CuraConfig, FilterKind, Hyperparams, Pooling, Series, Targets, Tensor,
};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-3.0..3.0f64, rows * cols)
        .prop_map(move |data| Tensor::matrix(rows, cols, data).unwrap())
}

fn series(rows: usize, cols: usize) -> impl Strategy<Value = Series> {
    prop::collection::vec(-100.0..100.0f64, rows * cols).prop_map(move |values| {
        Series::new((0..cols).map(|c| format!("c{c}")).collect(), values).unwrap()
    })
}

proptest! {
    #[test]
    fn matmul_is_associative(
        (a, b, c) in (1usize..5, 1usize..5, 1usize..5, 1usize..5)
            .prop_flat_map(|(m, k, n, p)| (matrix(m, k), matrix(k, n), matrix(n, p)))
    ) {
        let left = cura_core::tensor::matmul(&cura_core::tensor::matmul(&a, &b).unwrap(), &c).unwrap();
        let right = cura_core::tensor::matmul(&a, &cura_core::tensor::matmul(&b, &c).unwrap()).unwrap();
        for (x, y) in left.data().iter().zip(right.data()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn unit_impulse_convolution_reproduces_the_kernel_taps(
        k in 1usize..6,
        d in 1usize..4,
        taps in prop::collection::vec(-2.0..2.0f64, 5 * 3),
    ) {
        // an impulse at the padded center row reads the kernel back out
        let len = 11usize;
        let kernel = Tensor::new(vec![k, d], taps[..k * d].to_vec()).unwrap();
        let bias = Tensor::zeros(vec![d]);
        let mut data = vec![0.0; len * d];
        let center = 5;
        for c in 0..d {
            data[center * d + c] = 1.0;
        }
        let x = Tensor::matrix(len, d, data).unwrap();
        let y = cura_core::tensor::conv1d(&x, &kernel, &bias, cura_core::ConvMode::Depthwise).unwrap();
        let pad_left = k / 2;
        for j in 0..k {
            let row = center + pad_left - j;
            for c in 0..d {
                prop_assert_eq!(y.get(row, c), kernel.get(j, c));
            }
        }
    }

    #[test]
    fn sigmoid_output_is_strictly_inside_the_unit_interval(x in -1e308..1e308f64) {
        let s = Activation::Sigmoid.value(x);
        prop_assert!(s > 0.0 && s < 1.0);
    }

    #[test]
    fn gated_combination_forms_agree(
        g in 0.0..1.0f64,
        r in -100.0..100.0f64,
    ) {
        prop_assert!(((g * r + r) - (r * (g + 1.0))).abs() <= 1e-12);
    }

    #[test]
    fn r2_is_shift_invariant(
        pairs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 3..30),
        shift in -1000.0..1000.0f64,
    ) {
        let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let yhat: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(y.iter().any(|&v| v != y[0]));
        let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let ps: Vec<f64> = yhat.iter().map(|v| v + shift).collect();
        let a = r2_score(&y, &yhat).unwrap();
        let b = r2_score(&ys, &ps).unwrap();
        prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()));
    }

    #[test]
    fn f1_is_invariant_under_joint_relabeling(
        n in 1usize..40,
        k in 1usize..6,
        seed in 0u64..1000,
    ) {
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let preds: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let labels_p: Vec<usize> = labels.iter().map(|&c| perm[c]).collect();
        let preds_p: Vec<usize> = preds.iter().map(|&c| perm[c]).collect();
        let a = f1_macro(&labels, &preds, k).unwrap();
        let b = f1_macro(&labels_p, &preds_p, k).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn normalizer_roundtrips_within_1e9(
        s in (5usize..40, 1usize..4).prop_flat_map(|(r, c)| series(r, c)),
        probe in prop::collection::vec(-500.0..500.0f64, 12),
    ) {
        let fit = zscore_fit(&s, s.rows());
        prop_assume!(fit.is_ok());
        let norm = fit.unwrap();
        let rows = 12 / norm.cols();
        let m = Tensor::matrix(rows, norm.cols(), probe[..rows * norm.cols()].to_vec()).unwrap();
        let back = zscore_invert(&norm, &zscore_apply(&norm, &m).unwrap()).unwrap();
        for (a, b) in m.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn window_count_matches_exhaustive_enumeration(
        n in 1usize..200,
        l in 1usize..30,
        h in 0usize..5,
        stride in 1usize..10,
    ) {
        let mut brute = 0usize;
        let mut i = 0usize;
        while i * stride + l + h <= n {
            brute += 1;
            i += 1;
        }
        match window_count(n, l, h, stride) {
            Some(s) => prop_assert_eq!(s, brute),
            None => prop_assert_eq!(brute, 0),
        }
    }

    #[test]
    fn window_inputs_and_targets_are_adjacent_rows(
        n in 10usize..80,
        l in 1usize..8,
        h in 1usize..4,
        stride in 1usize..5,
    ) {
        prop_assume!(n >= l + h);
        // encode the row index as the value so windows reveal their rows
        let s = Series::new(vec!["row".to_string()], (0..n).map(|r| r as f64).collect()).unwrap();
        let d = make_windows(&s, l, h, stride, 0).unwrap();
        let targets = match d.targets() {
            Targets::Regression(t) => t.clone(),
            _ => unreachable!(),
        };
        for i in 0..d.len() {
            let input = d.input(i);
            prop_assert_eq!(input.get(0, 0), (i * stride) as f64);
            let last_input_row = input.get(l - 1, 0);
            prop_assert_eq!(targets.get(i, 0), last_input_row + 1.0);
        }
    }

    #[test]
    fn split_preserves_order_and_floor_rule(
        n in 12usize..60,
        frac in 0.1..0.9f64,
    ) {
        let s = Series::new(vec!["row".to_string()], (0..n).map(|r| r as f64).collect()).unwrap();
        let d = make_windows(&s, 3, 1, 1, 0).unwrap();
        let (train, test) = chrono_split(&d, frac).unwrap();
        prop_assert_eq!(train.len(), (d.len() as f64 * frac).floor() as usize);
        prop_assert_eq!(train.len() + test.len(), d.len());
        for i in 0..test.len() {
            prop_assert_eq!(test.input(i), d.input(train.len() + i));
        }
    }

    #[test]
    fn pipeline_statistics_ignore_the_test_region(
        n in 40usize..100,
        seed in 0u64..500,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..n).map(|_| 10.0 * rng.random::<f64>()).collect();
        let s = Series::new(vec!["x".to_string()], values.clone()).unwrap();
        let (l, h, stride, frac) = (5usize, 1usize, 1usize, 0.7);
        let out = forecast_pipeline(&s, l, h, stride, 0, frac);
        prop_assume!(out.is_ok());
        let (train, test) = out.unwrap();

        // rows beyond what the training windows touch
        let covered = (train.len() - 1) * stride + l + h;
        prop_assume!(covered < n);
        let mut tampered = values;
        for v in tampered.iter_mut().skip(covered) {
            *v += 1000.0 * rng.random::<f64>() + 1.0;
        }
        let s2 = Series::new(vec!["x".to_string()], tampered).unwrap();
        let (train2, test2) = forecast_pipeline(&s2, l, h, stride, 0, frac).unwrap();
        prop_assert_eq!(&train.normalizer, &train2.normalizer);
        // and the training windows themselves are bit-identical
        for i in 0..train.len() {
            prop_assert_eq!(train.input(i), train2.input(i));
        }
        prop_assert_eq!(test.len(), test2.len());
    }

    #[test]
    fn adam_with_zero_gradients_and_no_decay_is_identity(
        values in prop::collection::vec(-5.0..5.0f64, 1..20),
        lr in 1e-5..1.0f64,
        steps in 1usize..6,
    ) {
        let hyper = Hyperparams { learning_rate: lr, weight_decay: 0.0, ..Hyperparams::default() };
        let mut theta = values.clone();
        let mut slot = AdamSlot { m: vec![0.0; values.len()], v: vec![0.0; values.len()], vmax: vec![0.0; values.len()] };
        let zeros = vec![0.0; values.len()];
        for t in 1..=steps {
            adam_step_slice(&mut theta, &zeros, &mut slot, t as u64, &hyper);
        }
        prop_assert_eq!(theta, values);
    }

    #[test]
    fn forward_is_equivariant_to_row_order_without_a_filter(
        seed in 0u64..300,
        l in 2usize..6,
        d in 2usize..5,
    ) {
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};
        let mut config = CuraConfig::canonical(2, l, d, 2);
        config.filter_kind = FilterKind::None;
        config.pooling = Pooling::Mean;
        let params = init_params(&config, seed).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::matrix(l, 2, (0..l * 2).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect()).unwrap();
        let mut order: Vec<usize> = (0..l).collect();
        order.shuffle(&mut rng);
        let mut permuted = Vec::with_capacity(l * 2);
        for &r in &order {
            permuted.extend_from_slice(&x.data()[r * 2..(r + 1) * 2]);
        }
        let xp = Tensor::matrix(l, 2, permuted).unwrap();
        let y = cura_forward(&x, &params, &config).unwrap();
        let yp = cura_forward(&xp, &params, &config).unwrap();
        for c in 0..2 {
            prop_assert!((y.get(0, c) - yp.get(0, c)).abs() <= 1e-12);
        }
    }

    #[test]
    fn gate_band_holds_for_random_inputs_and_params(
        seed in 0u64..300,
        scale in 0.1..50.0f64,
    ) {
        use rand::{Rng, SeedableRng};
        let config = CuraConfig::canonical(2, 6, 4, 1);
        let params = init_params(&config, seed).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::matrix(6, 2, (0..12).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()).unwrap();
        let g = cura_core::gating_forward(&x, &params, &config).unwrap();
        let r = cura_core::residual_forward(&x, &params).unwrap();
        let h1 = cura_core::residual_gate_combine(&g, &r).unwrap();
        for i in 0..h1.numel() {
            if r.data()[i] != 0.0 {
                let ratio = h1.data()[i] / r.data()[i];
                prop_assert!(ratio > 1.0 && ratio < 2.0);
            }
        }
    }
}
