use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, schedule_lr, AdamState, TrainConfig};
use super::loss::loss_and_gradients;
use super::mlp::MlpRegressor;
use crate::data::DescriptorSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Mean coordinate error over every valid descriptor seen this epoch,
    /// measured before each step's update.
    pub mean_loss: f64,
}

/// Valid rows of one frame, as `f64` inputs and targets.
fn labeled_rows(frame: &DescriptorSet) -> Option<(Array2<f64>, Array2<f64>)> {
    let gt = frame.gt()?;
    let rows: Vec<usize> = (0..frame.len()).filter(|&i| gt.valid[i]).collect();
    if rows.is_empty() {
        return None;
    }
    let desc = frame.descriptors();
    let x = Array2::from_shape_fn((rows.len(), frame.dim()), |(r, c)| desc[[rows[r], c]] as f64);
    let y = Array2::from_shape_fn((rows.len(), 3), |(r, c)| gt.coords[rows[r]][c] as f64);
    Some((x, y))
}

/// Trains `model` on the labeled frames of `frames`.
pub fn fit(
    model: MlpRegressor,
    frames: &[DescriptorSet],
    config: &TrainConfig,
) -> Result<(MlpRegressor, Vec<EpochStats>)> {
    fit_with_progress(model, frames, config, |_| {})
}

/// [`fit`] with a callback invoked after every epoch.
pub fn fit_with_progress(
    mut model: MlpRegressor,
    frames: &[DescriptorSet],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(MlpRegressor, Vec<EpochStats>)> {
    config.validate()?;
    let labeled: Vec<&DescriptorSet> = frames
        .iter()
        .filter(|f| f.gt().is_some_and(|g| g.n_valid() > 0))
        .collect();
    if labeled.is_empty() {
        return Err(Error::DegenerateDataset(
            "no frame carries valid ground-truth coordinates".into(),
        ));
    }
    if let Some(f) = labeled.iter().find(|f| f.dim() != model.input_dim()) {
        return Err(Error::InvalidInput(format!(
            "frame {}: descriptor dimension {} does not match model input {}",
            f.frame_id(),
            f.dim(),
            model.input_dim()
        )));
    }

    let rows: Vec<(Array2<f64>, Array2<f64>)> =
        labeled.iter().filter_map(|f| labeled_rows(f)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = AdamState::new(&model);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let dim = model.input_dim();

    for epoch in 0..config.epochs {
        let lr = schedule_lr(epoch, config);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for group in order.chunks(config.batch_size) {
            let picks: Vec<Option<Vec<usize>>> = group
                .iter()
                .map(|&i| {
                    let n = rows[i].0.nrows();
                    config.epoch_sample.filter(|&s| s < n).map(|s| {
                        let mut idx = index::sample(&mut rng, n, s).into_vec();
                        idx.sort_unstable();
                        idx
                    })
                })
                .collect();
            let n: usize = group
                .iter()
                .zip(&picks)
                .map(|(&i, p)| p.as_ref().map_or(rows[i].0.nrows(), Vec::len))
                .sum();
            let mut x = Array2::zeros((n, dim));
            let mut y = Array2::zeros((n, 3));
            let mut row = 0;
            for (&i, pick) in group.iter().zip(&picks) {
                let (px, py) = &rows[i];
                match pick {
                    Some(idx) => {
                        for &j in idx {
                            x.row_mut(row).assign(&px.row(j));
                            y.row_mut(row).assign(&py.row(j));
                            row += 1;
                        }
                    }
                    None => {
                        let r = px.nrows();
                        x.slice_mut(ndarray::s![row..row + r, ..]).assign(px);
                        y.slice_mut(ndarray::s![row..row + r, ..]).assign(py);
                        row += r;
                    }
                }
            }
            let (loss, grads) = loss_and_gradients(&model, x.view(), y.view());
            adam_step(&mut model, &grads, &mut state, lr, config)?;
            loss_sum += loss * n as f64;
            seen += n;
        }
        let stats = EpochStats {
            epoch,
            lr,
            mean_loss: loss_sum / seen as f64,
        };
        on_epoch(&stats);
        trace.push(stats);
    }
    Ok((model, trace))
}

/// Loss trace text: one `epoch,lr,mean_loss` line per epoch.
pub fn format_loss_trace(trace: &[EpochStats]) -> String {
    trace
        .iter()
        .map(|s| format!("{},{:e},{}\n", s.epoch, s.lr, s.mean_loss))
        .collect()
}
