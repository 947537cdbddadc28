//! Oracles shared by the integration and acceptance tests.

#![allow(dead_code)]

use f2m::regressor::{backward, Layer, MlpRegressor};
use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mean Euclidean distance over valid rows, straight from the definition.
pub fn reference_loss(
    model: &MlpRegressor,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    valid: &[bool],
) -> f64 {
    let pred = model.forward_rows(x).unwrap();
    let mut sum = 0.0;
    let mut n = 0;
    for (i, (p, t)) in pred.outer_iter().zip(y.outer_iter()).enumerate() {
        if valid[i] {
            sum += (&p - &t).mapv(|v| v * v).sum().sqrt();
            n += 1;
        }
    }
    sum / n as f64
}

/// Smallest |pre-activation| of any hidden unit over the batch.
fn relu_margin(model: &MlpRegressor, x: ArrayView2<'_, f64>) -> f64 {
    let layers = model.layers();
    let mut act = x.to_owned();
    let mut margin = f64::INFINITY;
    for layer in &layers[..layers.len() - 1] {
        let mut z = act.dot(&layer.weight.t());
        z += &layer.bias.view().insert_axis(Axis(0));
        margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
        z.mapv_inplace(|v| v.max(0.0));
        act = z;
    }
    margin
}

/// A random model and batch: hidden widths and input dim in 1..=16, output 3,
/// k in 1..=8 rows with at least one valid. Resampled until every hidden
/// pre-activation is at least `margin` away from the ReLU kink, so a central
/// difference of step `h ≪ margin` never straddles it.
pub struct GradCase {
    pub model: MlpRegressor,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub valid: Vec<bool>,
}

pub fn random_grad_case(seed: u64, margin: f64) -> GradCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let depth = rng.random_range(1..=4);
        let mut dims: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=16)).collect();
        dims.push(3);
        let layers: Vec<Layer> = dims
            .windows(2)
            .map(|w| Layer {
                weight: Array2::from_shape_fn((w[1], w[0]), |_| rng.random_range(-1.0..1.0)),
                bias: ndarray::Array1::from_shape_fn(w[1], |_| rng.random_range(-0.5..0.5)),
            })
            .collect();
        let model = MlpRegressor::from_layers(layers).unwrap();
        let k = rng.random_range(1..=8);
        let x = Array2::from_shape_fn((k, dims[0]), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((k, 3), |_| rng.random_range(-2.0..2.0));
        let mut valid: Vec<bool> = (0..k).map(|_| rng.random_bool(0.8)).collect();
        if !valid.iter().any(|v| *v) {
            valid[0] = true;
        }
        if relu_margin(&model, x.view()) >= margin {
            return GradCase { model, x, y, valid };
        }
    }
}

fn perturbed(model: &MlpRegressor, layer: usize, bias: bool, idx: usize, delta: f64) -> MlpRegressor {
    let mut layers = model.layers().to_vec();
    let l = &mut layers[layer];
    if bias {
        l.bias[idx] += delta;
    } else {
        let cols = l.weight.ncols();
        l.weight[[idx / cols, idx % cols]] += delta;
    }
    MlpRegressor::from_layers(layers).unwrap()
}

/// Largest relative error between analytic and central-difference partials.
///
/// Relative error is `|a - n| / max(|a|, |n|, floor)`; the floor only matters
/// for partials that are zero up to rounding.
pub fn max_gradient_rel_error(case: &GradCase, h: f64, floor: f64) -> f64 {
    let GradCase { model, x, y, valid } = case;
    let (_, grads) = backward(model, x.view(), y.view(), valid).unwrap();
    let mut worst = 0.0f64;
    for (li, layer) in model.layers().iter().enumerate() {
        let g = &grads.layers[li];
        let entries = [(false, layer.weight.len()), (true, layer.bias.len())];
        for (bias, count) in entries {
            for idx in 0..count {
                let plus = reference_loss(&perturbed(model, li, bias, idx, h), x.view(), y.view(), valid);
                let minus =
                    reference_loss(&perturbed(model, li, bias, idx, -h), x.view(), y.view(), valid);
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = if bias {
                    g.bias[idx]
                } else {
                    let cols = g.weight.ncols();
                    g.weight[[idx / cols, idx % cols]]
                };
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
                worst = worst.max(rel);
            }
        }
    }
    worst
}
