use nalgebra::{Vector2, Vector3};
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Ground-truth scene coordinates attached to a frame, one per keypoint.
///
/// Entries with `valid == false` carry no usable label (e.g. keypoints that were
/// never triangulated) and are excluded from the training loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub coords: Vec<[f32; 3]>,
    pub valid: Vec<bool>,
}

impl GroundTruth {
    pub fn all_valid(coords: Vec<[f32; 3]>) -> Self {
        let valid = vec![true; coords.len()];
        GroundTruth { coords, valid }
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Sparse keypoints, detector scores and descriptors of one image.
///
/// All per-keypoint arrays share the same length `k`; descriptors are stored as a
/// `k × M` matrix so a frame always has a well-defined dimension even when empty.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    frame_id: String,
    keypoints: Vec<[f32; 2]>,
    scores: Vec<f32>,
    descriptors: Array2<f32>,
    gt: Option<GroundTruth>,
}

impl DescriptorSet {
    pub fn new(
        frame_id: impl Into<String>,
        keypoints: Vec<[f32; 2]>,
        scores: Vec<f32>,
        descriptors: Array2<f32>,
        gt: Option<GroundTruth>,
    ) -> Result<Self> {
        let frame_id = frame_id.into();
        let k = keypoints.len();
        if descriptors.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "frame {frame_id}: descriptor dimension must be positive"
            )));
        }
        if scores.len() != k || descriptors.nrows() != k {
            return Err(Error::InvalidInput(format!(
                "frame {frame_id}: {k} keypoints but {} scores and {} descriptors",
                scores.len(),
                descriptors.nrows()
            )));
        }
        if let Some(gt) = &gt {
            if gt.coords.len() != k || gt.valid.len() != k {
                return Err(Error::InvalidInput(format!(
                    "frame {frame_id}: {k} keypoints but {} gt coords and {} validity flags",
                    gt.coords.len(),
                    gt.valid.len()
                )));
            }
        }
        Ok(DescriptorSet {
            frame_id,
            keypoints,
            scores,
            descriptors,
            gt,
        })
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.descriptors.ncols()
    }

    pub fn keypoints(&self) -> &[[f32; 2]] {
        &self.keypoints
    }

    pub fn keypoint(&self, i: usize) -> Vector2<f64> {
        let [x, y] = self.keypoints[i];
        Vector2::new(x as f64, y as f64)
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn descriptors(&self) -> ArrayView2<'_, f32> {
        self.descriptors.view()
    }

    pub fn descriptor(&self, i: usize) -> ArrayView1<'_, f32> {
        self.descriptors.row(i)
    }

    pub fn gt(&self) -> Option<&GroundTruth> {
        self.gt.as_ref()
    }

    pub fn gt_coord(&self, i: usize) -> Option<Vector3<f64>> {
        let gt = self.gt.as_ref()?;
        if !gt.valid[i] {
            return None;
        }
        let [x, y, z] = gt.coords[i];
        Some(Vector3::new(x as f64, y as f64, z as f64))
    }

    pub fn with_frame_id(mut self, id: impl Into<String>) -> Self {
        self.frame_id = id.into();
        self
    }

    pub fn without_gt(mut self) -> Self {
        self.gt = None;
        self
    }

    /// Keeps the entries at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> DescriptorSet {
        DescriptorSet {
            frame_id: self.frame_id.clone(),
            keypoints: indices.iter().map(|&i| self.keypoints[i]).collect(),
            scores: indices.iter().map(|&i| self.scores[i]).collect(),
            descriptors: self.descriptors.select(Axis(0), indices),
            gt: self.gt.as_ref().map(|gt| GroundTruth {
                coords: indices.iter().map(|&i| gt.coords[i]).collect(),
                valid: indices.iter().map(|&i| gt.valid[i]).collect(),
            }),
        }
    }
}
