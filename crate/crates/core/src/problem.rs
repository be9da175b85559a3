//! The calibration search problem: decision vector, bounds, scene data and the
//! objective evaluator.
//!
//! A genome `[x, y, z, yaw, pitch, roll, n]` decodes to a correction transform that is
//! applied on top of the scene's initial extrinsics:
//! `T(genome) = correction ∘ initial`. The last gene selects how many LiDAR points
//! take part in the evaluation.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evolution::Problem;
use crate::features::{
    extract_image_edges, extract_intensity_points, extract_lidar_edges, extract_reflective_points,
    EdgePointSet, GrayImage, DEFAULT_DEPTH_GAP, DEFAULT_GRADIENT_THRESHOLD, DEFAULT_INTENSITY_THRESHOLD,
};
use crate::geometry::{
    project_indices, CameraIntrinsics, EulerAngles, ImageSize, PointCloud, ProjectedPoint, RigidTransform,
};
use crate::kdtree::KdTree2;
use crate::objectives::{
    chamfer_sum_with_tree, combine, computational_cost, ChamferNormalization, CostMode, MeasuredReference,
    Measurement, ObjectiveVector, WeightPair, EMPTY_ESTIMATE_PENALTY,
};

pub const NUM_VARIABLES: usize = 7;
pub const DEFAULT_N_MIN: usize = 100;

/// Gene names in genome order.
pub const VARIABLE_NAMES: [&str; NUM_VARIABLES] = ["x", "y", "z", "yaw", "pitch", "roll", "n"];

/// `[x, y, z, yaw, pitch, roll, n]`; meters, radians, and a real-valued point count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationVector(pub [f64; NUM_VARIABLES]);

impl CalibrationVector {
    pub fn new(translation: [f64; 3], yaw: f64, pitch: f64, roll: f64, n: f64) -> Self {
        Self([translation[0], translation[1], translation[2], yaw, pitch, roll, n])
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn angles(&self) -> EulerAngles {
        EulerAngles {
            yaw: self.0[3],
            pitch: self.0[4],
            roll: self.0[5],
        }
    }

    pub fn count(&self) -> f64 {
        self.0[6]
    }

    /// Bitwise equality, used for duplicate elimination.
    pub fn same_bits(&self, other: &Self) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationBounds {
    /// Half-width of the translation box, per axis, in meters.
    pub translation: f64,
    /// Half-width of the rotation box, per angle, in radians.
    pub rotation: f64,
    pub n_min: usize,
    pub n_max: usize,
}

impl CalibrationBounds {
    /// ±1.5 m, ±25°.
    pub fn standard(n_max: usize) -> Self {
        Self {
            translation: 1.5,
            rotation: 25f64.to_radians(),
            n_min: DEFAULT_N_MIN.min(n_max),
            n_max,
        }
    }

    /// ±1.5 m, ±0.1 rad.
    pub fn narrow_rotation(n_max: usize) -> Self {
        Self {
            rotation: 0.1,
            ..Self::standard(n_max)
        }
    }

    /// Same box with the point count pinned to `n_max`.
    pub fn with_full_count(self) -> Self {
        Self {
            n_min: self.n_max,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.translation > 0.0 && self.translation.is_finite()) {
            return Err(Error::invalid("translation bound must be positive"));
        }
        if !(self.rotation > 0.0 && self.rotation < std::f64::consts::FRAC_PI_2) {
            return Err(Error::invalid("rotation bound must lie in (0, pi/2)"));
        }
        if self.n_min < 1 || self.n_min > self.n_max {
            return Err(Error::invalid(format!(
                "point-count bounds [{}, {}] invalid",
                self.n_min, self.n_max
            )));
        }
        Ok(())
    }

    pub fn lower(&self) -> [f64; NUM_VARIABLES] {
        let (t, r) = (self.translation, self.rotation);
        [-t, -t, -t, -r, -r, -r, self.n_min as f64]
    }

    pub fn upper(&self) -> [f64; NUM_VARIABLES] {
        let (t, r) = (self.translation, self.rotation);
        [t, t, t, r, r, r, self.n_max as f64]
    }

    pub fn contains(&self, x: &CalibrationVector) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        x.0.iter().enumerate().all(|(i, v)| *v >= lo[i] && *v <= hi[i])
    }
}

/// Clamps every gene into its bound interval. Non-finite genes go to the lower bound.
pub fn repair(raw: [f64; NUM_VARIABLES], b: &CalibrationBounds) -> CalibrationVector {
    let (lo, hi) = (b.lower(), b.upper());
    let mut out = raw;
    for i in 0..NUM_VARIABLES {
        out[i] = if raw[i].is_nan() { lo[i] } else { raw[i].clamp(lo[i], hi[i]) };
    }
    CalibrationVector(out)
}

/// Correction transform and integer point count encoded by `x`.
pub fn decode(x: &CalibrationVector, b: &CalibrationBounds) -> Result<(RigidTransform, usize)> {
    let t = RigidTransform::from_euler_translation(x.angles(), x.translation())?;
    let n = x.count().round().clamp(b.n_min as f64, b.n_max as f64) as usize;
    Ok((t, n))
}

/// Where the intensity ground truth and its LiDAR counterpart come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntensitySource {
    /// Bright image pixels, matched against the LiDAR edge points.
    #[default]
    Image,
    /// Bright image pixels, matched against highly reflective LiDAR returns.
    LidarReflectance,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FeatureSettings {
    pub gradient_threshold: f64,
    pub depth_gap: f64,
    pub intensity_threshold: u8,
    pub intensity_source: IntensitySource,
    /// Reflectance cut-off in [0,1] for [`IntensitySource::LidarReflectance`].
    pub reflectance_threshold: f64,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self {
            gradient_threshold: DEFAULT_GRADIENT_THRESHOLD,
            depth_gap: DEFAULT_DEPTH_GAP,
            intensity_threshold: DEFAULT_INTENSITY_THRESHOLD,
            intensity_source: IntensitySource::Image,
            reflectance_threshold: 0.7,
        }
    }
}

/// Fixed data of one calibration instance.
#[derive(Debug, Clone)]
pub struct CalibrationScene {
    pub cloud: PointCloud,
    pub image: GrayImage,
    pub intrinsics: CameraIntrinsics,
    pub gt_edges: EdgePointSet,
    pub gt_intensity: EdgePointSet,
    /// Extrinsics the search corrects.
    pub initial: RigidTransform,
    /// Validation only; never read during objective evaluation.
    pub ground_truth: Option<RigidTransform>,
    pub settings: FeatureSettings,
}

impl CalibrationScene {
    pub fn new(
        cloud: PointCloud,
        image: GrayImage,
        intrinsics: CameraIntrinsics,
        initial: RigidTransform,
        ground_truth: Option<RigidTransform>,
        settings: FeatureSettings,
    ) -> Result<Self> {
        intrinsics.validate()?;
        let gt_edges = extract_image_edges(&image, settings.gradient_threshold)?;
        if gt_edges.is_empty() {
            return Err(Error::invalid("camera image has no edge above the gradient threshold"));
        }
        let gt_intensity = extract_intensity_points(&image, settings.intensity_threshold);
        Ok(Self {
            cloud,
            image,
            intrinsics,
            gt_edges,
            gt_intensity,
            initial,
            ground_truth,
            settings,
        })
    }

    pub fn image_size(&self) -> ImageSize {
        ImageSize::new(self.image.width, self.image.height)
    }

    pub fn has_intensity(&self) -> bool {
        !self.gt_intensity.is_empty()
    }

    /// Genome that maps the initial extrinsics onto the ground truth, when known.
    pub fn ground_truth_genome(&self) -> Option<[f64; 6]> {
        let gt = self.ground_truth?;
        let corr = gt.compose(&self.initial.inverse());
        let a = corr.euler_angles();
        let t = corr.translation;
        Some([t.x, t.y, t.z, a.yaw, a.pitch, a.roll])
    }
}

/// Seeded permutation rank of every cloud point; the first `n` points of the shuffle
/// are those with rank `< n`.
#[derive(Debug, Clone)]
pub struct SubsampleOrder {
    rank: Vec<u32>,
}

impl SubsampleOrder {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<u32> = (0..len as u32).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut rank = vec![0u32; len];
        for (k, &i) in perm.iter().enumerate() {
            rank[i as usize] = k as u32;
        }
        Self { rank }
    }

    /// Indices of the selected points in scan order.
    pub fn selected(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        let n = n.min(u32::MAX as usize) as u32;
        self.rank.iter().enumerate().filter(move |(_, r)| **r < n).map(|(i, _)| i)
    }
}

/// Intermediate products of one evaluation, exposed for overlays and diagnostics.
#[derive(Debug, Clone)]
pub struct EvaluationDetail {
    pub transform: RigidTransform,
    pub n: usize,
    pub projected: Vec<ProjectedPoint>,
    pub lidar_edges: EdgePointSet,
    pub edge_chamfer: f64,
    pub intensity_chamfer: Option<f64>,
    pub objectives: ObjectiveVector,
}

/// Evaluator for one run: scene, bounds, weights, cost mode and subsample order.
#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    scene: Arc<CalibrationScene>,
    bounds: CalibrationBounds,
    weights: WeightPair,
    cost_mode: CostMode,
    normalization: ChamferNormalization,
    order: Arc<SubsampleOrder>,
    gt_edge_count: usize,
    gt_intensity_count: usize,
}

impl CalibrationProblem {
    pub fn new(
        scene: Arc<CalibrationScene>,
        bounds: CalibrationBounds,
        weights: WeightPair,
        cost_mode: CostMode,
        run_seed: u64,
    ) -> Result<Self> {
        bounds.validate()?;
        if bounds.n_max > scene.cloud.len() {
            return Err(Error::invalid(format!(
                "n_max = {} exceeds the cloud size {}",
                bounds.n_max,
                scene.cloud.len()
            )));
        }
        if weights.w2() > 0.0 && !scene.has_intensity() {
            return Err(Error::invalid(
                "intensity weight is non-zero but the scene has no intensity points",
            ));
        }
        let order = Arc::new(SubsampleOrder::new(scene.cloud.len(), run_seed));
        Ok(Self {
            gt_edge_count: scene.gt_edges.len(),
            gt_intensity_count: scene.gt_intensity.len(),
            scene,
            bounds,
            weights,
            cost_mode,
            normalization: ChamferNormalization::default(),
            order,
        })
    }

    pub fn with_normalization(mut self, normalization: ChamferNormalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_bounds(&self, bounds: CalibrationBounds) -> Result<Self> {
        bounds.validate()?;
        if bounds.n_max > self.scene.cloud.len() {
            return Err(Error::invalid("n_max exceeds the cloud size"));
        }
        Ok(Self {
            bounds,
            ..self.clone()
        })
    }

    pub fn with_weights(&self, weights: WeightPair) -> Result<Self> {
        if weights.w2() > 0.0 && !self.scene.has_intensity() {
            return Err(Error::invalid("scene has no intensity points"));
        }
        Ok(Self {
            weights,
            ..self.clone()
        })
    }

    pub fn with_cost_mode(&self, cost_mode: CostMode) -> Self {
        Self {
            cost_mode,
            ..self.clone()
        }
    }

    pub fn scene(&self) -> &CalibrationScene {
        &self.scene
    }

    pub fn weights(&self) -> WeightPair {
        self.weights
    }

    pub fn cost_mode(&self) -> &CostMode {
        &self.cost_mode
    }

    /// Full camera-from-LiDAR transform for a genome.
    pub fn candidate_transform(&self, x: &CalibrationVector) -> Result<RigidTransform> {
        let (corr, _) = decode(x, &self.bounds)?;
        Ok(corr.compose(&self.scene.initial))
    }

    pub fn evaluate_detailed(&self, x: &CalibrationVector) -> Result<EvaluationDetail> {
        if !self.bounds.contains(x) {
            return Err(Error::invalid(format!("genome {:?} outside bounds", x.0)));
        }
        let (corr, n) = decode(x, &self.bounds)?;
        let (detail, measurement) = match self.cost_mode {
            CostMode::Proxy => (self.run_pipeline(&corr, n)?, None),
            CostMode::Measured(reference) => {
                let reps = reference.inner_iterations.max(1);
                let start = Instant::now();
                let mut last = None;
                for _ in 0..reps {
                    last = Some(self.run_pipeline(&corr, n)?);
                }
                let elapsed = start.elapsed().as_secs_f64() / reps as f64;
                let detail = last.expect("at least one repetition");
                let bytes = bytes_touched(n, &detail);
                (
                    detail,
                    Some(Measurement {
                        elapsed_seconds: elapsed,
                        bytes_touched: bytes,
                    }),
                )
            }
        };
        let cost = computational_cost(n, (self.bounds.n_min, self.bounds.n_max), &self.cost_mode, measurement)?;
        let mut detail = detail;
        detail.objectives.comp_cost = cost.total();
        Ok(detail)
    }

    fn run_pipeline(&self, corr: &RigidTransform, n: usize) -> Result<EvaluationDetail> {
        let scene = &*self.scene;
        let transform = corr.compose(&scene.initial);
        let projected = project_indices(
            &scene.cloud,
            self.order.selected(n),
            &transform,
            &scene.intrinsics,
            scene.image_size(),
        );
        let lidar_edges = extract_lidar_edges(&projected, scene.settings.depth_gap)?;
        let tree = (!lidar_edges.is_empty()).then(|| KdTree2::new(&lidar_edges.points));

        let edge_chamfer = match &tree {
            Some(t) => self.normalize(chamfer_sum_with_tree(&scene.gt_edges, t), self.gt_edge_count, n),
            None => EMPTY_ESTIMATE_PENALTY,
        };
        let intensity_chamfer = if self.weights.w2() > 0.0 {
            let value = match scene.settings.intensity_source {
                IntensitySource::Image => match &tree {
                    Some(t) => self.normalize(chamfer_sum_with_tree(&scene.gt_intensity, t), self.gt_intensity_count, n),
                    None => EMPTY_ESTIMATE_PENALTY,
                },
                IntensitySource::LidarReflectance => {
                    let reflective = extract_reflective_points(&projected, scene.settings.reflectance_threshold);
                    if reflective.is_empty() {
                        EMPTY_ESTIMATE_PENALTY
                    } else {
                        let t = KdTree2::new(&reflective.points);
                        self.normalize(chamfer_sum_with_tree(&scene.gt_intensity, &t), self.gt_intensity_count, n)
                    }
                }
            };
            Some(value)
        } else {
            None
        };
        let chamfer = match intensity_chamfer {
            Some(ic) => combine(self.weights, edge_chamfer, ic),
            None => edge_chamfer,
        };
        Ok(EvaluationDetail {
            transform,
            n,
            projected,
            lidar_edges,
            edge_chamfer,
            intensity_chamfer,
            objectives: ObjectiveVector::new(chamfer, 0.0),
        })
    }

    fn normalize(&self, sum: f64, gt_count: usize, n: usize) -> f64 {
        match self.normalization {
            ChamferNormalization::GroundTruthMean => sum / gt_count as f64,
            ChamferNormalization::LidarCount => sum / n as f64,
        }
    }

    /// Times the pipeline at `n = n_max` with a zero correction to obtain the
    /// reference constants for measured cost.
    pub fn calibrate_measured_reference(&self, inner_iterations: usize) -> Result<MeasuredReference> {
        let reps = inner_iterations.max(1);
        let n = self.bounds.n_max;
        let start = Instant::now();
        let mut last = None;
        for _ in 0..reps {
            last = Some(self.run_pipeline(&RigidTransform::identity(), n)?);
        }
        let t_ref = (start.elapsed().as_secs_f64() / reps as f64).max(1e-9);
        let detail = last.expect("at least one repetition");
        Ok(MeasuredReference {
            t_ref_seconds: t_ref,
            m_ref_bytes: bytes_touched(n, &detail).max(1.0),
            inner_iterations: reps,
        })
    }
}

/// Bytes read or allocated by one pipeline run: the selected cloud points, the
/// projected buffer and the edge tree.
fn bytes_touched(n: usize, detail: &EvaluationDetail) -> f64 {
    let point = std::mem::size_of::<Vector3<f64>>() + std::mem::size_of::<f64>();
    let projected = std::mem::size_of::<ProjectedPoint>();
    let edge = std::mem::size_of::<[f64; 2]>();
    (n * point + detail.projected.len() * projected + 2 * detail.lidar_edges.len() * edge) as f64
}

impl Problem for CalibrationProblem {
    fn bounds(&self) -> &CalibrationBounds {
        &self.bounds
    }

    fn evaluate(&self, genome: &CalibrationVector) -> Result<ObjectiveVector> {
        Ok(self.evaluate_detailed(genome)?.objectives)
    }

    fn serial_only(&self) -> bool {
        self.cost_mode.is_measured()
    }
}
