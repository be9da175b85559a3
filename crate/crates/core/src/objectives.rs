//! The two calibration objectives: Chamfer alignment error and evaluation cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::EdgePointSet;
use crate::kdtree::KdTree2;

/// Chamfer value returned when no LiDAR feature lands in the image. Finite so that
/// dominance comparisons stay well defined.
pub const EMPTY_ESTIMATE_PENALTY: f64 = 1e6;

/// `(E_chamfer, E_comp)`, both minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub chamfer: f64,
    pub comp_cost: f64,
}

impl ObjectiveVector {
    pub fn new(chamfer: f64, comp_cost: f64) -> Self {
        Self { chamfer, comp_cost }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.chamfer, self.comp_cost]
    }

    pub fn is_valid(&self) -> bool {
        self.chamfer.is_finite() && self.comp_cost.is_finite() && self.chamfer >= 0.0 && self.comp_cost >= 0.0
    }
}

/// How the summed squared distances are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChamferNormalization {
    /// Mean over ground-truth points.
    #[default]
    GroundTruthMean,
    /// Divide by the number of LiDAR points used for the evaluation.
    LidarCount,
}

/// Mean over `gt` of the squared distance to the nearest point of `est`.
///
/// Bit-identical to the direct double loop: per-point minima are exact and are summed
/// in `gt` order.
pub fn chamfer_distance(gt: &EdgePointSet, est: &EdgePointSet) -> Result<f64> {
    let sum = chamfer_sum(gt, est)?;
    Ok(match sum {
        Some(s) => s / gt.len() as f64,
        None => EMPTY_ESTIMATE_PENALTY,
    })
}

/// Sum of nearest squared distances, `None` when `est` is empty.
pub fn chamfer_sum(gt: &EdgePointSet, est: &EdgePointSet) -> Result<Option<f64>> {
    if gt.is_empty() {
        return Err(Error::invalid("ground-truth point set is empty"));
    }
    if est.is_empty() {
        return Ok(None);
    }
    let tree = KdTree2::new(&est.points);
    Ok(Some(chamfer_sum_with_tree(gt, &tree)))
}

pub(crate) fn chamfer_sum_with_tree(gt: &EdgePointSet, tree: &KdTree2) -> f64 {
    let mut sum = 0.0;
    for p in &gt.points {
        sum += tree.nearest_sq_dist(p).unwrap_or(f64::INFINITY);
    }
    sum
}

/// Edge/intensity weights; `w2` is always `1 - w1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPair {
    w1: f64,
}

impl WeightPair {
    pub fn new(w1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w1) {
            return Err(Error::invalid(format!("edge weight w1 = {w1} outside [0,1]")));
        }
        Ok(Self { w1 })
    }

    pub fn edge_only() -> Self {
        Self { w1: 1.0 }
    }

    pub fn w1(&self) -> f64 {
        self.w1
    }

    pub fn w2(&self) -> f64 {
        1.0 - self.w1
    }
}

/// `w1 * chamfer(gt_edge, est) + w2 * chamfer(gt_intensity, est)`.
pub fn weighted_chamfer(
    gt_edge: &EdgePointSet,
    gt_intensity: &EdgePointSet,
    est: &EdgePointSet,
    w: WeightPair,
) -> Result<f64> {
    if gt_intensity.is_empty() {
        return Err(Error::invalid("intensity ground-truth set is empty"));
    }
    let edge = chamfer_distance(gt_edge, est)?;
    let intensity = chamfer_distance(gt_intensity, est)?;
    Ok(combine(w, edge, intensity))
}

#[inline]
pub(crate) fn combine(w: WeightPair, edge: f64, intensity: f64) -> f64 {
    w.w1() * edge + w.w2() * intensity
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub t_norm: f64,
    pub m_norm: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.t_norm + self.m_norm
    }
}

/// Reference time/memory measured once per run at `n = n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredReference {
    pub t_ref_seconds: f64,
    pub m_ref_bytes: f64,
    /// Repetitions averaged per timed evaluation.
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CostMode {
    /// `t_norm = m_norm = n / n_max`.
    #[default]
    Proxy,
    Measured(MeasuredReference),
}

impl CostMode {
    pub fn is_measured(&self) -> bool {
        matches!(self, CostMode::Measured(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub elapsed_seconds: f64,
    pub bytes_touched: f64,
}

pub fn computational_cost(
    n: usize,
    bounds: (usize, usize),
    mode: &CostMode,
    measurement: Option<Measurement>,
) -> Result<CostBreakdown> {
    let (n_min, n_max) = bounds;
    if n < n_min || n > n_max || n_max == 0 {
        return Err(Error::invalid(format!("point count {n} outside [{n_min}, {n_max}]")));
    }
    match mode {
        CostMode::Proxy => {
            let r = n as f64 / n_max as f64;
            Ok(CostBreakdown { t_norm: r, m_norm: r })
        }
        CostMode::Measured(reference) => {
            let m = measurement
                .ok_or_else(|| Error::invalid("measured cost mode requires a measurement"))?;
            if reference.t_ref_seconds <= 0.0 || reference.m_ref_bytes <= 0.0 {
                return Err(Error::invalid("measured cost references must be positive"));
            }
            Ok(CostBreakdown {
                t_norm: m.elapsed_seconds / reference.t_ref_seconds,
                m_norm: m.bytes_touched / reference.m_ref_bytes,
            })
        }
    }
}
