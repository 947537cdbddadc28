use ndarray::Zip;

use super::loss::Gradients;
use super::mlp::{Layer, MlpRegressor};
use crate::error::{Error, Result};

/// Training hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Frames per optimizer step.
    pub batch_size: usize,
    pub lr0: f64,
    /// Multiplier applied at every fifth of the run.
    pub lr_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
    pub seed: u64,
    /// When set, every epoch draws this many descriptors per frame at random
    /// from the stored ones instead of using all of them.
    pub epoch_sample: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            batch_size: 8,
            lr0: 1e-3,
            lr_decay: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 5e-4,
            eps: 1e-8,
            seed: 0,
            epoch_sample: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.lr0 > 0.0) || !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("lr0 and eps must be positive, weight_decay non-negative");
        }
        if self.epoch_sample == Some(0) {
            return bad("epoch_sample must be at least 1");
        }
        Ok(())
    }
}

/// Learning rate for `epoch`: `lr0 · decay^⌊epoch / ⌈epochs/5⌉⌋`.
pub fn schedule_lr(epoch: usize, config: &TrainConfig) -> f64 {
    let period = config.epochs.div_ceil(5).max(1);
    let steps = (epoch / period) as i32;
    config.lr0 * config.lr_decay.powi(steps)
}

/// First and second moment accumulators of Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Layer>,
    pub v: Vec<Layer>,
    pub t: u64,
}

impl AdamState {
    pub fn new(model: &MlpRegressor) -> Self {
        let zeros: Vec<Layer> = model
            .layers()
            .iter()
            .map(|l| Layer::zeros(l.inputs(), l.outputs()))
            .collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update with L2 decay added to the gradient.
pub fn adam_step(
    model: &mut MlpRegressor,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    config: &TrainConfig,
) -> Result<()> {
    let layers = model.layers_mut();
    let shapes_ok = grads.layers.len() == layers.len()
        && state.m.len() == layers.len()
        && state.v.len() == layers.len()
        && layers.iter().enumerate().all(|(i, l)| {
            l.same_shape(&grads.layers[i]) && l.same_shape(&state.m[i]) && l.same_shape(&state.v[i])
        });
    if !shapes_ok {
        return Err(Error::InvalidInput(
            "gradient or optimizer state shape does not match the model".into(),
        ));
    }
    if !(lr > 0.0) {
        return Err(Error::InvalidInput(format!("learning rate must be positive, got {lr}")));
    }

    state.t += 1;
    let t = state.t as i32;
    let (b1, b2, wd, eps) = (config.beta1, config.beta2, config.weight_decay, config.eps);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let update = |theta: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
        let g = g + wd * *theta;
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *theta -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    for (i, layer) in layers.iter_mut().enumerate() {
        Zip::from(&mut layer.weight)
            .and(&grads.layers[i].weight)
            .and(&mut state.m[i].weight)
            .and(&mut state.v[i].weight)
            .for_each(update);
        Zip::from(&mut layer.bias)
            .and(&grads.layers[i].bias)
            .and(&mut state.m[i].bias)
            .and(&mut state.v[i].bias)
            .for_each(update);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};

    fn scalar_model(theta: f64) -> MlpRegressor {
        MlpRegressor::from_layers(vec![Layer {
            weight: Array2::from_elem((3, 1), theta),
            bias: Array1::from_elem(3, theta),
        }])
        .unwrap()
    }

    fn uniform_grads(model: &MlpRegressor, g: f64) -> Gradients {
        let mut grads = Gradients::zeros_like(model);
        for l in &mut grads.layers {
            l.weight.fill(g);
            l.bias.fill(g);
        }
        grads
    }

    #[test]
    fn first_step_is_about_minus_lr() {
        let config = TrainConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut model = scalar_model(0.0);
        let grads = uniform_grads(&model, 1.0);
        let mut state = AdamState::new(&model);
        adam_step(&mut model, &grads, &mut state, 1e-3, &config).unwrap();
        // m̂ = 1, v̂ = 1: Δθ = −lr / (1 + eps)
        let want = -1e-3 / (1.0 + 1e-8);
        for w in model.layers()[0].weight.iter() {
            assert!((w - want).abs() < 1e-18, "{w}");
        }
        assert!((want + 9.9999999e-4).abs() < 1e-15);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn zero_gradient_zero_params_is_a_no_op() {
        let config = TrainConfig::default();
        let mut model = scalar_model(0.0);
        let before = model.clone();
        let grads = uniform_grads(&model, 0.0);
        let mut state = AdamState::new(&model);
        adam_step(&mut model, &grads, &mut state, 0.5, &config).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn decay_alone_moves_parameters_toward_zero() {
        let config = TrainConfig::default();
        let mut model = scalar_model(1.0);
        let grads = uniform_grads(&model, 0.0);
        let mut state = AdamState::new(&model);
        adam_step(&mut model, &grads, &mut state, 1e-3, &config).unwrap();
        // g_eff = 5e-4 → Δθ = −lr · 5e-4 / (5e-4 + 1e-8)
        let want = 1.0 - 1e-3 * 5e-4 / (5e-4 + 1e-8);
        for w in model.layers()[0].weight.iter() {
            assert!((w - want).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let config = TrainConfig::default();
        let mut model = scalar_model(0.0);
        let other = MlpRegressor::zeros(&[2, 3]).unwrap();
        let grads = Gradients::zeros_like(&other);
        let mut state = AdamState::new(&model);
        assert!(matches!(
            adam_step(&mut model, &grads, &mut state, 1e-3, &config),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn schedule_examples() {
        let config = TrainConfig::default();
        assert_eq!(schedule_lr(0, &config), 1e-3);
        assert_eq!(schedule_lr(199, &config), 1e-3);
        assert_eq!(schedule_lr(200, &config), 5e-4);
        assert_eq!(schedule_lr(800, &config), 6.25e-5);
        assert_eq!(schedule_lr(999, &config), 6.25e-5);
        // 7 epochs: decays at multiples of ⌈7/5⌉ = 2
        let short = TrainConfig {
            epochs: 7,
            ..Default::default()
        };
        let lrs: Vec<f64> = (0..7).map(|e| schedule_lr(e, &short)).collect();
        assert_eq!(lrs, vec![1e-3, 1e-3, 5e-4, 5e-4, 2.5e-4, 2.5e-4, 1.25e-4]);
    }
}
