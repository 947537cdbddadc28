//! Synthetic scenes with exact ground truth.
//!
//! Landmarks are uniform in an axis-aligned box centered at the origin, each
//! carrying a unit-norm canonical descriptor. A view observes every landmark
//! that projects inside the image: the keypoint is the exact projection plus
//! Gaussian pixel noise, and the descriptor is the canonical one plus
//! per-component Gaussian noise, re-normalized.

mod config;

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub use config::SynthConfig;

use crate::data::{Camera, DatasetFrame, DescriptorSet, GroundTruth, SceneDataset, Split};
use crate::error::Result;
use crate::geometry::{Correspondence2D3D, Pose, MIN_DEPTH};
use crate::regressor::{Layer, MlpRegressor};

/// Upper bound on the cosine similarity between two canonical descriptors.
pub const MAX_DESCRIPTOR_SIMILARITY: f64 = 0.6;

/// Landmark positions (meters) and their unit-norm canonical descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub points: Vec<Vector3<f64>>,
    /// `n × M`, one unit row per landmark.
    pub descriptors: Array2<f64>,
}

impl SyntheticScene {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.descriptors.ncols()
    }
}

/// Independent RNG stream for item `index` of kind `tag`.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the mixed inputs
    let mut z = seed
        ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_SCENE: u64 = 1;
const TAG_TRAIN_POSE: u64 = 2;
const TAG_TEST_POSE: u64 = 3;
const TAG_RENDER: u64 = 4;

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Array1<f64> {
    loop {
        let v: Array1<f64> = Array1::from_shape_simple_fn(dim, || StandardNormal.sample(rng));
        let n = v.dot(&v).sqrt();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Landmarks uniform in the box with distinct canonical descriptors.
///
/// A descriptor whose similarity to an earlier one exceeds
/// [`MAX_DESCRIPTOR_SIMILARITY`] is redrawn. Positions are rounded to `f32` so
/// the stored ground truth equals them exactly.
pub fn generate_scene(config: &SynthConfig) -> SyntheticScene {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, TAG_SCENE, 0));
    let half = config.box_extents.map(|e| e / 2.0);
    let points = (0..config.n_landmarks)
        .map(|_| {
            Vector3::from_fn(|i, _| rng.random_range(-half[i]..=half[i]) as f32 as f64)
        })
        .collect();
    let dim = config.dim;
    let mut descriptors = Array2::zeros((config.n_landmarks, dim));
    for i in 0..config.n_landmarks {
        let mut attempts = 0;
        let d = loop {
            let d = random_unit(&mut rng, dim);
            attempts += 1;
            let clash = (0..i).any(|j| descriptors.row(j).dot(&d) > MAX_DESCRIPTOR_SIMILARITY);
            // dims too small to host n distinct directions would loop forever
            if !clash || attempts > 1000 {
                break d;
            }
        };
        descriptors.row_mut(i).assign(&d);
    }
    SyntheticScene {
        points,
        descriptors,
    }
}

/// Observes `scene` from `pose`. `seed` drives the noise of this view only.
pub fn render_view(
    scene: &SyntheticScene,
    pose: &Pose,
    camera: &Camera,
    config: &SynthConfig,
    frame_id: &str,
    seed: u64,
) -> DescriptorSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let px_noise = Normal::new(0.0, config.px_sigma).expect("sigma validated");
    let desc_noise = Normal::new(0.0, config.desc_sigma).expect("sigma validated");
    let k = &camera.intrinsics;

    let mut keypoints = Vec::new();
    let mut scores = Vec::new();
    let mut coords = Vec::new();
    let mut rows: Vec<f32> = Vec::new();
    for (i, p) in scene.points.iter().enumerate() {
        let pc = pose.transform(p);
        if pc.z <= MIN_DEPTH {
            continue;
        }
        let uv = k.project_camera_point(&pc);
        if !camera.contains(&uv) {
            continue;
        }
        let noisy = uv + Vector2::new(px_noise.sample(&mut rng), px_noise.sample(&mut rng));
        keypoints.push([noisy.x as f32, noisy.y as f32]);
        scores.push(rng.random::<f32>());
        coords.push([p.x as f32, p.y as f32, p.z as f32]);
        let mut d = scene.descriptors.row(i).to_owned();
        if config.desc_sigma > 0.0 {
            d.mapv_inplace(|v| v + desc_noise.sample(&mut rng));
            let n = d.dot(&d).sqrt();
            d /= n;
        }
        rows.extend(d.iter().map(|v| *v as f32));
    }
    let n = keypoints.len();
    let descriptors = Array2::from_shape_vec((n, scene.dim()), rows).expect("row-major fill");
    DescriptorSet::new(
        frame_id,
        keypoints,
        scores,
        descriptors,
        Some(GroundTruth::all_valid(coords)),
    )
    .expect("aligned by construction")
}

/// Camera on a jittered orbit around the box center, looking roughly at it.
pub fn orbit_pose(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Pose {
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let radius = sample_range(rng, config.orbit_radius);
    let height = sample_range(rng, config.orbit_height);
    let eye = Vector3::new(radius * angle.cos(), radius * angle.sin(), height);
    let j = config.look_jitter;
    let target = Vector3::new(
        rng.random_range(-1.0..=1.0) * j,
        rng.random_range(-1.0..=1.0) * j,
        rng.random_range(-1.0..=1.0) * j,
    );
    let base = Pose::look_at(&eye, &target, &Vector3::z()).expect("eye is off the orbit axis");
    // small roll about the viewing axis
    let roll = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), rng.random_range(-0.1..=0.1));
    Pose::from_center(roll * base.rotation, eye)
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Generates the scene and renders its train and test views.
pub fn build_dataset(config: &SynthConfig) -> Result<SceneDataset> {
    config.validate()?;
    let scene = generate_scene(config);
    let camera = config.camera();
    let mut frames = Vec::with_capacity(config.n_train_views + config.n_test_views);
    let views = (0..config.n_train_views)
        .map(|i| (Split::Train, TAG_TRAIN_POSE, i, format!("train_{i:05}")))
        .chain(
            (0..config.n_test_views)
                .map(|i| (Split::Test, TAG_TEST_POSE, i, format!("test_{i:05}"))),
        );
    for (split, tag, i, id) in views {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, tag, i as u64));
        let pose = orbit_pose(config, &mut rng);
        let render_seed = derive_seed(config.seed, TAG_RENDER + tag * 16, i as u64);
        let set = render_view(&scene, &pose, &camera, config, &id, render_seed);
        frames.push(DatasetFrame {
            set,
            split,
            pose: Some(pose),
        });
    }
    Ok(SceneDataset {
        scene: config.scene.clone(),
        dim: config.dim,
        camera,
        frames,
    })
}

/// A two-layer MLP that maps every canonical descriptor of `scene` to its
/// landmark exactly.
///
/// Hidden unit `j` computes `relu(c_j·d − τ)`; since canonical descriptors are
/// unit-norm and mutually below [`MAX_DESCRIPTOR_SIMILARITY`], only the unit of
/// the matching landmark fires on a noiseless observation, and the output layer
/// scales it back to that landmark's position.
pub fn lookup_regressor(scene: &SyntheticScene) -> Result<MlpRegressor> {
    let tau = 0.5 * (1.0 + MAX_DESCRIPTOR_SIMILARITY);
    let gain = 1.0 / (1.0 - tau);
    let n = scene.len();
    let hidden = Layer {
        weight: scene.descriptors.clone(),
        bias: Array1::from_elem(n, -tau),
    };
    let output = Layer {
        weight: Array2::from_shape_fn((3, n), |(r, j)| scene.points[j][r] * gain),
        bias: Array1::zeros(3),
    };
    MlpRegressor::from_layers(vec![hidden, output])
}

/// A uniformly random rotation with translation in `±t_range`.
pub fn random_pose(rng: &mut ChaCha8Rng, t_range: f64) -> Pose {
    let q = nalgebra::Quaternion::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    );
    let t = Vector3::from_fn(|_, _| rng.random_range(-t_range..=t_range));
    Pose::new(UnitQuaternion::from_quaternion(q), t)
}

/// A world point seen by `pose` at a uniformly random pixel and depth.
pub fn random_visible_point(
    rng: &mut ChaCha8Rng,
    pose: &Pose,
    camera: &Camera,
    depth: (f64, f64),
) -> Vector3<f64> {
    let k = &camera.intrinsics;
    let px = Vector2::new(
        rng.random_range(0.0..camera.width as f64),
        rng.random_range(0.0..camera.height as f64),
    );
    let z = rng.random_range(depth.0..=depth.1);
    let pc = Vector3::new((px.x - k.cx) / k.fx * z, (px.y - k.cy) / k.fy * z, z);
    pose.rotation.inverse() * (pc - pose.translation)
}

/// Planted 2D-3D matches for robust-estimation tests.
#[derive(Debug, Clone)]
pub struct ContaminatedMatches {
    pub correspondences: Vec<Correspondence2D3D>,
    /// `true` for matches generated as inliers.
    pub is_inlier: Vec<bool>,
}

/// `n_inliers` matches with Gaussian pixel noise plus `n_outliers` matches whose
/// pixel is uniform over the image, shuffled together.
///
/// Outlier pixels are redrawn while they land within `min_outlier_px` of the
/// true projection of their world point, so every planted outlier is
/// geometrically inconsistent with the generating pose.
pub fn contaminated_matches(
    rng: &mut ChaCha8Rng,
    pose: &Pose,
    camera: &Camera,
    n_inliers: usize,
    n_outliers: usize,
    px_sigma: f64,
    min_outlier_px: f64,
) -> ContaminatedMatches {
    let noise = Normal::new(0.0, px_sigma).expect("non-negative sigma");
    let depth = (1.0, 8.0);
    let k = &camera.intrinsics;
    let mut items: Vec<(Correspondence2D3D, bool)> = Vec::with_capacity(n_inliers + n_outliers);
    for _ in 0..n_inliers {
        let w = random_visible_point(rng, pose, camera, depth);
        let uv = k.project_camera_point(&pose.transform(&w));
        let px = uv + Vector2::new(noise.sample(rng), noise.sample(rng));
        items.push((Correspondence2D3D::new(px, w), true));
    }
    for _ in 0..n_outliers {
        let w = random_visible_point(rng, pose, camera, depth);
        let uv = k.project_camera_point(&pose.transform(&w));
        let px = loop {
            let px = Vector2::new(
                rng.random_range(0.0..camera.width as f64),
                rng.random_range(0.0..camera.height as f64),
            );
            if (px - uv).norm() > min_outlier_px {
                break px;
            }
        };
        items.push((Correspondence2D3D::new(px, w), false));
    }
    use rand::seq::SliceRandom;
    items.shuffle(rng);
    let (correspondences, is_inlier) = items.into_iter().unzip();
    ContaminatedMatches {
        correspondences,
        is_inlier,
    }
}
