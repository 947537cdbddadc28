//! Mean Euclidean coordinate loss and its exact gradients.
//!
//! The loss is the mean, over all valid descriptors of a batch, of
//! `‖ŵ − w‖₂`. The gradient of the norm is `r / ‖r‖` and is taken as zero when
//! `‖r‖ < 1e-12`.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;

use super::mlp::{Layer, MlpRegressor, SceneCoordinates};
use crate::error::{Error, Result};

/// Residual norms below this get a zero subgradient.
pub const ZERO_RESIDUAL: f64 = 1e-12;

/// Rows per work unit when accumulating gradients. Partial results are
/// summed in chunk order, so the result does not depend on the thread count.
const CHUNK_ROWS: usize = 256;

/// Partial derivatives with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpRegressor) -> Self {
        Gradients {
            layers: model
                .layers()
                .iter()
                .map(|l| Layer::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| *v == 0.0))
    }
}

/// Mean over valid entries of the per-point Euclidean distance.
pub fn coordinate_loss(
    pred: &SceneCoordinates,
    gt: &SceneCoordinates,
    validity: &[bool],
) -> Result<f64> {
    if pred.len() != gt.len() || pred.len() != validity.len() {
        return Err(Error::InvalidInput(format!(
            "loss inputs differ in length: {} predictions, {} targets, {} flags",
            pred.len(),
            gt.len(),
            validity.len()
        )));
    }
    let (sum, n) = pred
        .0
        .iter()
        .zip(&gt.0)
        .zip(validity)
        .filter(|(_, v)| **v)
        .fold((0.0, 0usize), |(s, n), ((p, g), _)| (s + (p - g).norm(), n + 1));
    if n == 0 {
        return Err(Error::DegenerateBatch);
    }
    Ok(sum / n as f64)
}

/// Loss value and gradients for a batch of descriptors (`n × M`) with targets
/// (`n × 3`); rows whose flag is false are ignored.
pub fn backward(
    model: &MlpRegressor,
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    validity: &[bool],
) -> Result<(f64, Gradients)> {
    let n = inputs.nrows();
    if targets.nrows() != n || validity.len() != n || targets.ncols() != 3 {
        return Err(Error::InvalidInput(format!(
            "backward: {n} inputs, {:?} targets, {} flags",
            targets.dim(),
            validity.len()
        )));
    }
    if inputs.ncols() != model.input_dim() {
        return Err(Error::InvalidInput(format!(
            "descriptor dimension {} does not match model input {}",
            inputs.ncols(),
            model.input_dim()
        )));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| validity[i]).collect();
    if keep.is_empty() {
        return Err(Error::DegenerateBatch);
    }
    let x = inputs.select(Axis(0), &keep);
    let y = targets.select(Axis(0), &keep);
    Ok(loss_and_gradients(model, x.view(), y.view()))
}

/// Mean loss and its gradients over rows that are all valid.
pub(crate) fn loss_and_gradients(
    model: &MlpRegressor,
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
) -> (f64, Gradients) {
    let n = inputs.nrows();
    let scale = 1.0 / n as f64;
    let starts: Vec<usize> = (0..n).step_by(CHUNK_ROWS).collect();
    let partials: Vec<(f64, Gradients)> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + CHUNK_ROWS).min(n);
            chunk_gradients(
                model,
                inputs.slice(s![start..end, ..]),
                targets.slice(s![start..end, ..]),
                scale,
            )
        })
        .collect();
    let mut iter = partials.into_iter();
    let (mut sum, mut grads) = iter.next().expect("at least one chunk");
    for (s, g) in iter {
        sum += s;
        grads.add_assign(&g);
    }
    (sum * scale, grads)
}

/// Summed distance of one chunk and the gradient of `scale · Σ‖r‖`.
fn chunk_gradients(
    model: &MlpRegressor,
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    scale: f64,
) -> (f64, Gradients) {
    let layers = model.layers();
    let last = layers.len() - 1;

    // activations[0] is the input, activations[i + 1] the output of layer i
    let mut activations: Vec<Array2<f64>> = Vec::with_capacity(layers.len() + 1);
    activations.push(inputs.to_owned());
    for (i, layer) in layers.iter().enumerate() {
        let mut z = activations[i].dot(&layer.weight.t());
        z += &layer.bias.view().insert_axis(Axis(0));
        if i != last {
            z.mapv_inplace(super::mlp::relu);
        }
        activations.push(z);
    }

    let pred = &activations[layers.len()];
    let mut delta = pred - &targets;
    let mut sum = 0.0;
    for mut row in delta.outer_iter_mut() {
        let norm = row.dot(&row).sqrt();
        sum += norm;
        if norm < ZERO_RESIDUAL {
            row.fill(0.0);
        } else {
            row *= scale / norm;
        }
    }

    let mut grads = Gradients::zeros_like(model);
    for i in (0..layers.len()).rev() {
        grads.layers[i].weight = delta.t().dot(&activations[i]);
        grads.layers[i].bias = delta.sum_axis(Axis(0));
        if i > 0 {
            let mut prev = delta.dot(&layers[i].weight);
            // ReLU derivative from the post-activation value
            Zip::from(&mut prev)
                .and(&activations[i])
                .for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            delta = prev;
        }
    }
    (sum, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use ndarray::array;

    fn coords(v: &[[f64; 3]]) -> SceneCoordinates {
        SceneCoordinates(v.iter().map(|p| Vector3::from(*p)).collect())
    }

    #[test]
    fn loss_examples() {
        let a = coords(&[[1.0, -2.0, 0.5], [3.0, 3.0, 3.0]]);
        assert_eq!(coordinate_loss(&a, &a, &[true, true]).unwrap(), 0.0);

        let pred = coords(&[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let gt = coords(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!(coordinate_loss(&pred, &gt, &[true, true]).unwrap(), 0.5);

        let pred = coords(&[[3.0, 4.0, 0.0]]);
        let gt = coords(&[[0.0, 0.0, 0.0]]);
        assert_eq!(coordinate_loss(&pred, &gt, &[true]).unwrap(), 5.0);
    }

    #[test]
    fn invalid_entries_are_ignored_and_all_invalid_is_degenerate() {
        let pred = coords(&[[3.0, 4.0, 0.0], [100.0, 0.0, 0.0]]);
        let gt = coords(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!(coordinate_loss(&pred, &gt, &[true, false]).unwrap(), 5.0);
        assert!(matches!(
            coordinate_loss(&pred, &gt, &[false, false]),
            Err(Error::DegenerateBatch)
        ));
    }

    #[test]
    fn output_residual_gradient_is_unit_direction_over_k() {
        // single linear layer with zero weights and bias (1,0,0): the output is
        // (1,0,0) for any input, so dL/dbias = r/‖r‖ / k with k = 1
        let model = MlpRegressor::from_layers(vec![Layer {
            weight: Array2::zeros((3, 2)),
            bias: array![1.0, 0.0, 0.0],
        }])
        .unwrap();
        let x = array![[0.5, -1.0]];
        let y = array![[0.0, 0.0, 0.0]];
        let (loss, g) = backward(&model, x.view(), y.view(), &[true]).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(g.layers[0].bias, array![1.0, 0.0, 0.0]);
        assert_eq!(g.layers[0].weight, array![[0.5, -1.0], [0.0, 0.0], [0.0, 0.0]]);

        // two descriptors: each contributes 1/k
        let x2 = array![[0.5, -1.0], [0.0, 2.0]];
        let y2 = array![[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let (_, g2) = backward(&model, x2.view(), y2.view(), &[true, true]).unwrap();
        assert_eq!(g2.layers[0].bias, array![1.0, 0.0, 0.0]);
        assert_eq!(g2.layers[0].weight.row(0).to_vec(), vec![0.25, 0.5]);
    }

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        let model = MlpRegressor::new_random(&[4, 6, 3], 3).unwrap();
        let x = array![[0.1, 0.2, -0.3, 0.4], [1.0, 0.0, 0.5, -0.5]];
        let y = model.forward_rows(x.view()).unwrap();
        let (loss, g) = backward(&model, x.view(), y.view(), &[true, true]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.is_zero());
    }

    #[test]
    fn chunked_sum_matches_single_chunk() {
        let model = MlpRegressor::new_random(&[5, 7, 3], 8).unwrap();
        let n = CHUNK_ROWS * 2 + 17;
        let x = Array2::from_shape_fn((n, 5), |(i, j)| ((i * 31 + j * 17) % 23) as f64 / 23.0 - 0.5);
        let y = Array2::from_shape_fn((n, 3), |(i, j)| ((i + j) % 5) as f64 * 0.1);
        let (loss, g) = loss_and_gradients(&model, x.view(), y.view());
        let (sum, g_single) = chunk_gradients(&model, x.view(), y.view(), 1.0 / n as f64);
        assert!((loss - sum / n as f64).abs() < 1e-12);
        for (a, b) in g.layers.iter().zip(&g_single.layers) {
            let diff = (&a.weight - &b.weight).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
            assert!(diff < 1e-12);
        }
    }
}
