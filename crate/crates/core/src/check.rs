//! Finite-difference verification of the recorded gradients.
//!
//! Central differences at 64-bit precision are accurate to roughly 1e-10 on
//! well-scaled losses, so an implementation error in any backward rule shows
//! up orders of magnitude above the comparison threshold.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::TrainError;
use crate::model::{cura_forward_batch, init_params, CuraConfig, CuraParams};
use crate::tape::Tape;
use crate::tensor::Tensor;

/// Which training loss to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckLoss {
    Mse,
    CrossEntropy,
}

/// Central-difference step. Large enough to dominate f64 rounding noise in
/// the loss, small enough that curvature error stays near 1e-10.
const FD_STEP: f64 = 1e-5;

fn loss_value(
    config: &CuraConfig,
    params: &CuraParams,
    x: &Tensor,
    targets: &Tensor,
    labels: &[usize],
    loss: CheckLoss,
) -> Result<f64, TrainError> {
    let tape = Tape::new();
    let pred = cura_forward_batch(&tape, x, params, config, config.seq_len)?;
    Ok(match loss {
        CheckLoss::Mse => tape.mse_loss(&pred, targets)?.item(),
        CheckLoss::CrossEntropy => tape.softmax_cross_entropy(&pred, labels)?.item(),
    })
}

/// Compare recorded gradients against central finite differences on a
/// randomly drawn batch, for every element of every parameter tensor.
///
/// Returns the maximum relative error, where the error of an (analytic,
/// numeric) pair is |a - n| / max(|a|, |n|, 1e-2); the floor keeps pure
/// rounding noise in near-zero gradients from registering as disagreement.
pub fn max_grad_rel_err(
    config: &CuraConfig,
    windows: usize,
    seed: u64,
    loss: CheckLoss,
) -> Result<f64, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = init_params(config, seed)?;
    let rows = windows * config.seq_len;
    let x = Tensor::matrix(
        rows,
        config.in_channels,
        (0..rows * config.in_channels)
            .map(|_| 3.0 * rng.random::<f64>() - 1.5)
            .collect(),
    )
    .map_err(TrainError::Tensor)?;
    let targets = Tensor::matrix(
        windows,
        config.out_dim,
        (0..windows * config.out_dim)
            .map(|_| 2.0 * rng.random::<f64>() - 1.0)
            .collect(),
    )
    .map_err(TrainError::Tensor)?;
    let labels: Vec<usize> = (0..windows)
        .map(|_| rng.random_range(0..config.out_dim))
        .collect();

    // recorded gradients from one taped pass
    let tape = Tape::new();
    let traced = params.traced(&tape);
    let pred = cura_forward_batch(&tape, &x, &traced, config, config.seq_len)?;
    let loss_node = match loss {
        CheckLoss::Mse => tape.mse_loss(&pred, &targets)?,
        CheckLoss::CrossEntropy => tape.softmax_cross_entropy(&pred, &labels)?,
    };
    let grads = tape.backward(&loss_node)?;
    let analytic: Vec<Tensor> = traced
        .named()
        .iter()
        .map(|(_, t)| {
            grads
                .get(t)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(t.shape().to_vec()))
        })
        .collect();

    let mut worst = 0.0_f64;
    let tensor_count = params.named().len();
    for ti in 0..tensor_count {
        let numel = params.named()[ti].1.numel();
        for j in 0..numel {
            let original = params.named()[ti].1.data()[j];
            params.named_mut()[ti].1.data_mut()[j] = original + FD_STEP;
            let up = loss_value(config, &params, &x, &targets, &labels, loss)?;
            params.named_mut()[ti].1.data_mut()[j] = original - FD_STEP;
            let down = loss_value(config, &params, &x, &targets, &labels, loss)?;
            params.named_mut()[ti].1.data_mut()[j] = original;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic[ti].data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-2);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
