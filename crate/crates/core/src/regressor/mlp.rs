use nalgebra::Vector3;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DescriptorSet;
use crate::error::{Error, Result};

/// Hidden and output widths of the full-size regressor (input dimension excluded).
pub const FULL_HIDDEN: [usize; 5] = [512, 1024, 1024, 512, 3];
/// Hidden and output widths of the small regressor (input dimension excluded).
pub const TINY_HIDDEN: [usize; 5] = [512, 512, 512, 128, 3];

/// Named layer layouts; the input width is the descriptor dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Full,
    Tiny,
}

impl Architecture {
    pub fn layer_dims(self, input_dim: usize) -> Vec<usize> {
        self.scaled_layer_dims(input_dim, 1)
    }

    /// Layer dims with every hidden width divided by `divisor` (at least 1 unit).
    pub fn scaled_layer_dims(self, input_dim: usize, divisor: usize) -> Vec<usize> {
        let hidden: &[usize] = match self {
            Architecture::Full => &FULL_HIDDEN,
            Architecture::Tiny => &TINY_HIDDEN,
        };
        let divisor = divisor.max(1);
        let last = hidden.len() - 1;
        std::iter::once(input_dim)
            .chain(
                hidden
                    .iter()
                    .enumerate()
                    .map(|(i, &w)| if i == last { w } else { (w / divisor).max(1) }),
            )
            .collect()
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Architecture::Full),
            "tiny" => Ok(Architecture::Tiny),
            other => Err(Error::Config(format!(
                "unknown architecture {other:?} (expected full or tiny)"
            ))),
        }
    }
}

/// One affine layer: `weight` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    pub(crate) fn same_shape(&self, other: &Layer) -> bool {
        self.weight.dim() == other.weight.dim() && self.bias.len() == other.bias.len()
    }
}

/// Predicted or ground-truth 3D world points, meters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneCoordinates(pub Vec<Vector3<f64>>);

impl SceneCoordinates {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn from_rows(rows: ArrayView2<'_, f64>) -> Self {
        SceneCoordinates(
            rows.outer_iter()
                .map(|r| Vector3::new(r[0], r[1], r[2]))
                .collect(),
        )
    }

    pub fn to_rows(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.0.len(), 3), |(i, j)| self.0[i][j])
    }
}

/// Shared-weights MLP applied to every descriptor independently.
///
/// ReLU follows every layer except the last, which emits the 3D coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpRegressor {
    layers: Vec<Layer>,
}

impl MlpRegressor {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("model needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.inputs() == 0 || l.outputs() == 0 || l.bias.len() != l.outputs() {
                return Err(Error::InvalidInput(format!(
                    "layer {i}: inconsistent shapes {:?} / {}",
                    l.weight.dim(),
                    l.bias.len()
                )));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(Error::InvalidInput(format!(
                    "layer {i}: expects {} inputs but previous layer emits {}",
                    l.inputs(),
                    layers[i - 1].outputs()
                )));
            }
        }
        if layers.last().map(Layer::outputs) != Some(3) {
            return Err(Error::InvalidInput("last layer must have 3 outputs".into()));
        }
        Ok(MlpRegressor { layers })
    }

    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        Self::from_layers(
            layer_dims
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
        )
    }

    /// Weights uniform in `±1/√fan_in`, zero biases.
    pub fn new_random(layer_dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                Layer {
                    weight: Array2::from_shape_simple_fn((w[1], w[0]), || {
                        rng.random_range(-bound..bound)
                    }),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    /// Total number of weights and biases.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Forward pass on an `n × M` matrix of descriptors, returning `n × 3`.
    pub fn forward_rows(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "descriptor dimension {} does not match model input {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut act = inputs.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = act.dot(&layer.weight.t());
            z += &layer.bias.view().insert_axis(Axis(0));
            if i != last {
                z.mapv_inplace(relu);
            }
            act = z;
        }
        Ok(act)
    }

    /// Scene coordinate for every descriptor of `batch`.
    pub fn forward(&self, batch: &DescriptorSet) -> Result<SceneCoordinates> {
        if batch.dim() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "frame {}: descriptor dimension {} does not match model input {}",
                batch.frame_id(),
                batch.dim(),
                self.input_dim()
            )));
        }
        if batch.is_empty() {
            return Ok(SceneCoordinates::default());
        }
        let x = batch.descriptors().mapv(f64::from);
        Ok(SceneCoordinates::from_rows(self.forward_rows(x.view())?.view()))
    }
}

pub(crate) fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(Error::InvalidInput(format!(
            "layer dims {layer_dims:?}: need at least two positive entries"
        )));
    }
    if layer_dims.last() != Some(&3) {
        return Err(Error::InvalidInput(format!(
            "layer dims {layer_dims:?}: output width must be 3"
        )));
    }
    Ok(())
}

/// Sum over layers of `in·out + out` for the given dims.
pub fn param_count_for(layer_dims: &[usize]) -> usize {
    layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn frame(desc: Array2<f32>) -> DescriptorSet {
        let k = desc.nrows();
        DescriptorSet::new("t", vec![[0.0, 0.0]; k], vec![1.0; k], desc, None).unwrap()
    }

    #[test]
    fn zero_network_outputs_origin() {
        let m = MlpRegressor::zeros(&[4, 5, 3]).unwrap();
        let out = m.forward(&frame(array![[0.3f32, -1.0, 2.0, 0.5]])).unwrap();
        assert_eq!(out.0, vec![Vector3::zeros()]);
    }

    #[test]
    fn single_linear_layer_matches_hand_product() {
        let w = array![[1.0, 2.0], [-0.5, 0.25], [3.0, 0.0]];
        let b = array![0.1, 0.2, -0.3];
        let m = MlpRegressor::from_layers(vec![Layer {
            weight: w.clone(),
            bias: b.clone(),
        }])
        .unwrap();
        let out = m.forward(&frame(array![[1.0f32, 2.0]])).unwrap();
        // oracle: explicit row-by-row sum
        let x = [1.0, 2.0];
        let want: Vec<f64> = (0..3)
            .map(|r| (0..2).map(|c| w[[r, c]] * x[c]).sum::<f64>() + b[r])
            .collect();
        assert_eq!(out.0[0], Vector3::new(want[0], want[1], want[2]));
        assert_eq!(out.0[0], Vector3::new(5.1, 0.2, 2.7));
    }

    #[test]
    fn permutation_equivariance() {
        let m = MlpRegressor::new_random(&[6, 8, 8, 3], 11).unwrap();
        let desc = Array2::from_shape_fn((5, 6), |(i, j)| ((i * 7 + j * 3) % 11) as f32 / 11.0 - 0.4);
        let f = frame(desc);
        let perm = [3, 0, 4, 1, 2];
        let a = m.forward(&f).unwrap();
        let b = m.forward(&f.select(&perm)).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            assert_eq!(b.0[i], a.0[p]);
        }
    }

    #[test]
    fn empty_input_and_dimension_mismatch() {
        let m = MlpRegressor::new_random(&[4, 3], 0).unwrap();
        let empty = DescriptorSet::new("e", vec![], vec![], Array2::zeros((0, 4)), None).unwrap();
        assert!(m.forward(&empty).unwrap().is_empty());
        let wrong = frame(Array2::zeros((2, 5)));
        assert!(matches!(m.forward(&wrong), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn preset_parameter_counts() {
        let full = Architecture::Full.layer_dims(256);
        let tiny = Architecture::Tiny.layer_dims(256);
        assert_eq!(full, vec![256, 512, 1024, 1024, 512, 3]);
        assert_eq!(tiny, vec![256, 512, 512, 512, 128, 3]);
        assert_eq!(param_count_for(&full), 2_232_835);
        assert_eq!(param_count_for(&tiny), 722_947);
        assert_eq!(MlpRegressor::zeros(&full).unwrap().param_count(), 2_232_835);
        assert_eq!(MlpRegressor::zeros(&[2, 3]).unwrap().param_count(), 9);
    }

    #[test]
    fn scaled_dims_keep_output_width() {
        assert_eq!(
            Architecture::Tiny.scaled_layer_dims(64, 4),
            vec![64, 128, 128, 128, 32, 3]
        );
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = MlpRegressor::new_random(&[16, 8, 3], 5).unwrap();
        let b = MlpRegressor::new_random(&[16, 8, 3], 5).unwrap();
        assert_eq!(a, b);
        assert!(a.layers()[0].weight.iter().all(|w| w.abs() <= (6.0f64 / 16.0).sqrt()));
        assert!(a.layers()[0].bias.iter().all(|b| *b == 0.0));
    }
}
