//! The shared-weights scene coordinate regressor and its training.

mod adam;
mod loss;
mod mlp;
mod model_file;
mod train;

pub use crate::data::DescriptorSet;
pub use adam::{adam_step, schedule_lr, AdamState, TrainConfig};
pub use loss::{backward, coordinate_loss, Gradients, ZERO_RESIDUAL};
pub use mlp::{
    param_count_for, Architecture, Layer, MlpRegressor, SceneCoordinates, FULL_HIDDEN, TINY_HIDDEN,
};
pub use model_file::{model_from_bytes, model_to_bytes, read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{fit, fit_with_progress, format_loss_trace, EpochStats};

/// Total parameter count (`Σ in·out + out`).
pub fn param_count(model: &MlpRegressor) -> usize {
    model.param_count()
}
