//! Descriptor sets, the on-disk scene format, and frame/descriptor subsampling.

mod dataset;
mod frame;
mod frame_file;
mod ops;

pub use dataset::{
    read_dataset, write_dataset, Camera, DatasetFrame, SceneDataset, Split, MANIFEST_FILE,
    MANIFEST_VERSION,
};
pub use frame::{DescriptorSet, GroundTruth};
pub use frame_file::{frame_from_bytes, frame_to_bytes, read_frame, write_frame, FRAME_MAGIC, FRAME_VERSION};
pub use ops::{subsample_frames, top_k_descriptors};
