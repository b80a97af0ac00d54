//! Adam optimizer in its AMSGrad form, with decoupled weight decay.
//!
//! State is kept per parameter tensor in canonical parameter order, so a
//! (params, state) pair stays aligned without any name lookups.

use crate::error::{ConfigError, TensorError, TrainError};
use crate::model::CuraParams;
use crate::tensor::Tensor;

/// Training-loop knobs. The optimizer constants default to the usual Adam
/// values with AMSGrad enabled and a light decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub amsgrad: bool,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Hyperparams {
        Hyperparams {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            amsgrad: true,
            weight_decay: 1e-5,
            epochs: 100,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn field(name: &'static str, ok: bool, why: &str) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Field {
                    name,
                    why: why.to_string(),
                })
            }
        }
        field(
            "learning_rate",
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "must be finite and positive",
        )?;
        field("beta1", self.beta1 > 0.0 && self.beta1 < 1.0, "must lie in (0, 1)")?;
        field("beta2", self.beta2 > 0.0 && self.beta2 < 1.0, "must lie in (0, 1)")?;
        field(
            "epsilon",
            self.epsilon > 0.0 && self.epsilon.is_finite(),
            "must be finite and positive",
        )?;
        field(
            "weight_decay",
            self.weight_decay >= 0.0 && self.weight_decay.is_finite(),
            "must be finite and non-negative",
        )?;
        field("batch_size", self.batch_size >= 1, "must be positive")?;
        Ok(())
    }
}

/// Moment buffers for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamSlot {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Running elementwise max of `v`; consulted only when amsgrad is on.
    pub vmax: Vec<f64>,
}

impl AdamSlot {
    fn zeros(n: usize) -> AdamSlot {
        AdamSlot {
            m: vec![0.0; n],
            v: vec![0.0; n],
            vmax: vec![0.0; n],
        }
    }
}

/// Optimizer state: one slot per parameter tensor, plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub slots: Vec<AdamSlot>,
}

impl AdamState {
    /// Fresh zeroed state shaped after `params`, slot order canonical.
    pub fn new(params: &CuraParams) -> AdamState {
        AdamState {
            step: 0,
            slots: params
                .named()
                .iter()
                .map(|(_, t)| AdamSlot::zeros(t.numel()))
                .collect(),
        }
    }
}

/// One update on a flat value slice. `step` is the 1-based step count the
/// bias correction uses.
///
/// Weight decay is decoupled: values shrink by lr*wd before the moment
/// update, so decay strength does not depend on the gradient scale.
pub fn adam_step_slice(
    values: &mut [f64],
    grads: &[f64],
    slot: &mut AdamSlot,
    step: u64,
    hyper: &Hyperparams,
) {
    debug_assert_eq!(values.len(), grads.len());
    debug_assert_eq!(values.len(), slot.m.len());
    let bc1 = 1.0 - hyper.beta1.powi(step as i32);
    let bc2 = 1.0 - hyper.beta2.powi(step as i32);
    for i in 0..values.len() {
        values[i] *= 1.0 - hyper.learning_rate * hyper.weight_decay;
        let g = grads[i];
        slot.m[i] = hyper.beta1 * slot.m[i] + (1.0 - hyper.beta1) * g;
        slot.v[i] = hyper.beta2 * slot.v[i] + (1.0 - hyper.beta2) * g * g;
        let second = if hyper.amsgrad {
            slot.vmax[i] = slot.vmax[i].max(slot.v[i]);
            slot.vmax[i]
        } else {
            slot.v[i]
        };
        let m_hat = slot.m[i] / bc1;
        let v_hat = second / bc2;
        values[i] -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
    }
}

/// One optimizer step over a full parameter set.
///
/// `grads` must hold one tensor per parameter tensor, in canonical order
/// and with matching shapes — exactly what a backward pass over traced
/// parameters produces.
pub fn adam_amsgrad_step(
    params: &mut CuraParams,
    grads: &[Tensor],
    state: &mut AdamState,
    hyper: &Hyperparams,
) -> Result<(), TrainError> {
    hyper.validate()?;
    let mut named = params.named_mut();
    if named.len() != grads.len() || named.len() != state.slots.len() {
        return Err(TrainError::Tensor(TensorError::ShapeMismatch {
            op: "adam_amsgrad_step",
            left: vec![named.len()],
            right: vec![grads.len()],
        }));
    }
    for ((_, p), g) in named.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(TrainError::Tensor(TensorError::ShapeMismatch {
                op: "adam_amsgrad_step",
                left: p.shape().to_vec(),
                right: g.shape().to_vec(),
            }));
        }
    }
    state.step += 1;
    let step = state.step;
    for (((_, p), g), slot) in named.iter_mut().zip(grads).zip(state.slots.iter_mut()) {
        adam_step_slice(p.data_mut(), g.data(), slot, step, hyper);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, CuraConfig};

    fn no_decay() -> Hyperparams {
        Hyperparams {
            weight_decay: 0.0,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn zero_gradients_without_decay_leave_params_unchanged() {
        let config = CuraConfig::canonical(2, 5, 4, 1);
        let mut params = init_params(&config, 3).unwrap();
        let reference = params.clone();
        let mut state = AdamState::new(&params);
        let grads: Vec<Tensor> = params
            .named()
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape().to_vec()))
            .collect();
        for _ in 0..5 {
            adam_amsgrad_step(&mut params, &grads, &mut state, &no_decay()).unwrap();
        }
        assert_eq!(params, reference);
        assert_eq!(state.step, 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient_sign() {
        let mut values = [1.0, -2.0];
        let grads = [0.5, -0.125];
        let mut slot = AdamSlot::zeros(2);
        let hyper = no_decay();
        adam_step_slice(&mut values, &grads, &mut slot, 1, &hyper);
        // bias-corrected first step is lr * g / (|g| + eps) = ~lr * sign(g)
        assert!((values[0] - (1.0 - hyper.learning_rate)).abs() < 1e-9);
        assert!((values[1] - (-2.0 + hyper.learning_rate)).abs() < 1e-9);
    }

    #[test]
    fn two_steps_match_the_handwritten_recurrence() {
        let hyper = Hyperparams {
            learning_rate: 0.1,
            weight_decay: 0.0,
            ..Hyperparams::default()
        };
        let mut theta = [1.0];
        let mut slot = AdamSlot::zeros(1);
        adam_step_slice(&mut theta, &[0.5], &mut slot, 1, &hyper);
        adam_step_slice(&mut theta, &[-0.25], &mut slot, 2, &hyper);

        // the same recurrence written out longhand
        let (b1, b2, lr, eps) = (hyper.beta1, hyper.beta2, hyper.learning_rate, hyper.epsilon);
        let mut x = 1.0;
        let (mut m, mut v, mut vmax) = (0.0, 0.0, 0.0_f64);
        for (t, g) in [(1, 0.5), (2, -0.25)] {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            vmax = vmax.max(v);
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = vmax / (1.0 - b2.powi(t));
            x -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        assert_eq!(theta[0], x);
    }

    #[test]
    fn vmax_never_decreases() {
        let hyper = no_decay();
        let mut values = [0.0];
        let mut slot = AdamSlot::zeros(1);
        let mut prev = 0.0;
        for (t, g) in [(1, 2.0), (2, 0.001), (3, 0.0), (4, -3.0), (5, 0.0)] {
            adam_step_slice(&mut values, &[g], &mut slot, t, &hyper);
            assert!(slot.vmax[0] >= prev);
            prev = slot.vmax[0];
        }
    }

    #[test]
    fn decay_shrinks_before_update() {
        let hyper = Hyperparams {
            learning_rate: 0.5,
            weight_decay: 0.1,
            ..Hyperparams::default()
        };
        let mut values = [10.0];
        let mut slot = AdamSlot::zeros(1);
        adam_step_slice(&mut values, &[0.0], &mut slot, 1, &hyper);
        // zero gradient: only the multiplicative shrink applies
        assert_eq!(values[0], 10.0 * (1.0 - 0.5 * 0.1));
    }

    #[test]
    fn mismatched_gradient_shapes_are_rejected() {
        let config = CuraConfig::canonical(1, 4, 3, 1);
        let mut params = init_params(&config, 0).unwrap();
        let mut state = AdamState::new(&params);
        let mut grads: Vec<Tensor> = params
            .named()
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape().to_vec()))
            .collect();
        grads[0] = Tensor::zeros(vec![2, 2]);
        let err = adam_amsgrad_step(&mut params, &grads, &mut state, &Hyperparams::default());
        assert!(matches!(
            err,
            Err(TrainError::Tensor(TensorError::ShapeMismatch { .. }))
        ));
        grads.truncate(3);
        let err = adam_amsgrad_step(&mut params, &grads, &mut state, &Hyperparams::default());
        assert!(err.is_err());
    }

    #[test]
    fn amsgrad_off_tracks_plain_adam() {
        let hyper = Hyperparams {
            amsgrad: false,
            weight_decay: 0.0,
            ..Hyperparams::default()
        };
        let mut values = [1.0];
        let mut slot = AdamSlot::zeros(1);
        // large then tiny gradient: plain Adam forgets the spike, AMSGrad
        // would keep dividing by the remembered max
        adam_step_slice(&mut values, &[4.0], &mut slot, 1, &hyper);
        let plain_after_one = values[0];
        adam_step_slice(&mut values, &[1e-6], &mut slot, 2, &hyper);
        let mut values_ams = [1.0];
        let mut slot_ams = AdamSlot::zeros(1);
        let hyper_ams = Hyperparams { amsgrad: true, ..hyper.clone() };
        adam_step_slice(&mut values_ams, &[4.0], &mut slot_ams, 1, &hyper_ams);
        assert_eq!(plain_after_one, values_ams[0]);
        adam_step_slice(&mut values_ams, &[1e-6], &mut slot_ams, 2, &hyper_ams);
        // second step differs once v has decayed below vmax
        assert_ne!(values[0], values_ams[0]);
    }

    #[test]
    fn hyperparam_validation_names_the_offending_field() {
        let bad = Hyperparams {
            beta1: 1.0,
            ..Hyperparams::default()
        };
        let err = bad.validate().unwrap_err();
        assert!(err.to_string().contains("beta1"));
    }
}
