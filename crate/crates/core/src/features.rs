//! Edge and intensity feature extraction from camera images and projected LiDAR scans.

use crate::error::{Error, Result};
use crate::geometry::ProjectedPoint;

/// Sobel gradient threshold used when none is configured.
pub const DEFAULT_GRADIENT_THRESHOLD: f64 = 100.0;
/// Depth-jump threshold (meters) used when none is configured.
pub const DEFAULT_DEPTH_GAP: f64 = 0.5;
pub const DEFAULT_INTENSITY_THRESHOLD: u8 = 180;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::invalid(format!(
                "{width}x{height} image needs {} bytes, got {}",
                width.saturating_mul(height),
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }
}

/// 2-D pixel points, optionally weighted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgePointSet {
    pub points: Vec<[f64; 2]>,
    pub weights: Option<Vec<f64>>,
}

impl EdgePointSet {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        Self {
            points,
            weights: None,
        }
    }

    pub fn with_weights(points: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::invalid("point and weight counts differ"));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::invalid("weights must lie in [0,1]"));
        }
        Ok(Self {
            points,
            weights: Some(weights),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl From<Vec<[f64; 2]>> for EdgePointSet {
    fn from(points: Vec<[f64; 2]>) -> Self {
        Self::new(points)
    }
}

/// Pixels whose 3×3 Sobel gradient magnitude exceeds `threshold`, in row-major order.
///
/// Border pixels are never reported since their neighbourhood is incomplete.
pub fn extract_image_edges(img: &GrayImage, threshold: f64) -> Result<EdgePointSet> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::invalid(format!("gradient threshold must be > 0, got {threshold}")));
    }
    if img.width < 3 || img.height < 3 {
        return Err(Error::invalid(format!(
            "image {}x{} is smaller than the 3x3 Sobel kernel",
            img.width, img.height
        )));
    }
    let thr_sq = threshold * threshold;
    let mut points = Vec::new();
    for y in 1..img.height - 1 {
        for x in 1..img.width - 1 {
            let p = |dx: usize, dy: usize| img.get(x + dx - 1, y + dy - 1) as i32;
            let gx = (p(2, 0) + 2 * p(2, 1) + p(2, 2)) - (p(0, 0) + 2 * p(0, 1) + p(0, 2));
            let gy = (p(0, 2) + 2 * p(1, 2) + p(2, 2)) - (p(0, 0) + 2 * p(1, 0) + p(2, 0));
            let mag_sq = (gx * gx + gy * gy) as f64;
            if mag_sq > thr_sq {
                points.push([x as f64, y as f64]);
            }
        }
    }
    Ok(EdgePointSet::new(points))
}

/// Depth-discontinuity edges along the scan order of `projected`.
///
/// Whenever two consecutive points differ in depth by more than `depth_gap`, both are
/// reported. Each point appears at most once and the output keeps scan order.
pub fn extract_lidar_edges(projected: &[ProjectedPoint], depth_gap: f64) -> Result<EdgePointSet> {
    if depth_gap.is_nan() || depth_gap <= 0.0 {
        return Err(Error::invalid(format!("depth gap must be > 0, got {depth_gap}")));
    }
    let mut points = Vec::new();
    let mut last_pushed = usize::MAX;
    for i in 1..projected.len() {
        if (projected[i].depth - projected[i - 1].depth).abs() > depth_gap {
            if last_pushed != i - 1 {
                points.push([projected[i - 1].u, projected[i - 1].v]);
            }
            points.push([projected[i].u, projected[i].v]);
            last_pushed = i;
        }
    }
    Ok(EdgePointSet::new(points))
}

/// Pixels with luminance at or above `threshold`, weighted by luminance / 255.
pub fn extract_intensity_points(img: &GrayImage, threshold: u8) -> EdgePointSet {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for y in 0..img.height {
        for x in 0..img.width {
            let l = img.get(x, y);
            if l >= threshold {
                points.push([x as f64, y as f64]);
                weights.push(l as f64 / 255.0);
            }
        }
    }
    EdgePointSet {
        points,
        weights: Some(weights),
    }
}

/// Projected LiDAR returns with reflectance at or above `threshold` (in [0,1]).
pub fn extract_reflective_points(projected: &[ProjectedPoint], threshold: f64) -> EdgePointSet {
    let (points, weights) = projected
        .iter()
        .filter(|p| p.intensity >= threshold)
        .map(|p| ([p.u, p.v], p.intensity))
        .unzip();
    EdgePointSet {
        points,
        weights: Some(weights),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step_image(width: usize, height: usize, col: usize) -> GrayImage {
        let mut img = GrayImage::filled(width, height, 0);
        for y in 0..height {
            for x in col..width {
                img.set(x, y, 255);
            }
        }
        img
    }

    fn scan(depths: &[f64]) -> Vec<ProjectedPoint> {
        depths
            .iter()
            .enumerate()
            .map(|(i, &depth)| ProjectedPoint {
                u: i as f64,
                v: 0.0,
                depth,
                intensity: 0.0,
                source: i,
            })
            .collect()
    }

    #[test]
    fn uniform_image_has_no_edges() {
        let img = GrayImage::filled(16, 12, 77);
        assert!(extract_image_edges(&img, 1.0).unwrap().is_empty());
    }

    #[test]
    fn step_edge_lands_on_flanking_columns() {
        let (w, h, c) = (20, 10, 8);
        let edges = extract_image_edges(&step_image(w, h, c), 100.0).unwrap();
        let mut expected = Vec::new();
        for y in 1..h - 1 {
            expected.push([(c - 1) as f64, y as f64]);
            expected.push([c as f64, y as f64]);
        }
        assert_eq!(edges.points, expected);
    }

    #[test]
    fn unreachable_threshold_gives_nothing() {
        let edges = extract_image_edges(&step_image(20, 10, 8), 255.0 * 4.0 + 1.0).unwrap();
        assert!(edges.is_empty());
        // the peak response is exactly 1020, which is not strictly above 1020
        assert!(extract_image_edges(&step_image(20, 10, 8), 1020.0).unwrap().is_empty());
        assert_eq!(extract_image_edges(&step_image(20, 10, 8), 1019.0).unwrap().len(), 16);
    }

    #[test]
    fn tiny_image_rejected() {
        let img = GrayImage::filled(2, 5, 0);
        assert!(matches!(
            extract_image_edges(&img, 10.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(extract_image_edges(&GrayImage::filled(5, 5, 0), 0.0).is_err());
    }

    #[test]
    fn lidar_edges_on_depth_jump() {
        assert!(extract_lidar_edges(&scan(&[4.0; 10]), 0.5).unwrap().is_empty());
        let s = scan(&[10.0, 10.0, 10.0, 5.0, 5.0, 5.0]);
        let e = extract_lidar_edges(&s, 1.0).unwrap();
        assert_eq!(e.points, vec![[2.0, 0.0], [3.0, 0.0]]);
        assert!(extract_lidar_edges(&s, f64::INFINITY).unwrap().is_empty());
        assert!(extract_lidar_edges(&s, 0.0).is_err());
    }

    #[test]
    fn lidar_edges_no_duplicates_on_spike() {
        let e = extract_lidar_edges(&scan(&[10.0, 3.0, 10.0]), 1.0).unwrap();
        assert_eq!(e.points, vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
    }

    #[test]
    fn intensity_points() {
        let black = GrayImage::filled(8, 8, 0);
        assert!(extract_intensity_points(&black, 1).is_empty());

        let mut one = GrayImage::filled(8, 8, 0);
        one.set(3, 4, 255);
        let pts = extract_intensity_points(&one, 128);
        assert_eq!(pts.points, vec![[3.0, 4.0]]);
        assert_eq!(pts.weights, Some(vec![1.0]));
    }

    #[test]
    fn ramp_count_matches_counting_oracle() {
        // luminance = x for a 256-wide ramp, 3 rows
        let (w, h) = (256usize, 3usize);
        let data = (0..h).flat_map(|_| (0..w).map(|x| x as u8)).collect();
        let img = GrayImage::new(w, h, data).unwrap();
        for thr in [0u8, 1, 100, 200, 255] {
            let expected = h * (256 - thr as usize);
            assert_eq!(extract_intensity_points(&img, thr).len(), expected);
        }
    }

    fn arb_image() -> impl Strategy<Value = GrayImage> {
        (3usize..14, 3usize..14).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h)
                .prop_map(move |data| GrayImage::new(w, h, data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn edge_count_monotone_in_threshold(img in arb_image(), a in 1.0f64..1100.0, b in 1.0f64..1100.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let n_lo = extract_image_edges(&img, lo).unwrap().len();
            let n_hi = extract_image_edges(&img, hi).unwrap().len();
            prop_assert!(n_hi <= n_lo);
            for p in extract_image_edges(&img, lo).unwrap().points {
                prop_assert!(p[0] >= 0.0 && p[1] >= 0.0);
                prop_assert!(p[0] < img.width as f64 && p[1] < img.height as f64);
            }
        }

        #[test]
        fn edges_are_translation_equivariant(img in arb_image(), dx in 0usize..4, dy in 0usize..4, thr in 1.0f64..600.0) {
            let mut shifted = GrayImage::filled(img.width + dx, img.height + dy, 0);
            for y in 0..img.height {
                for x in 0..img.width {
                    shifted.set(x + dx, y + dy, img.get(x, y));
                }
            }
            let base = extract_image_edges(&img, thr).unwrap();
            let moved = extract_image_edges(&shifted, thr).unwrap();
            // interior points of the original keep their full neighbourhood after the shift
            for p in &base.points {
                let q = [p[0] + dx as f64, p[1] + dy as f64];
                prop_assert!(moved.points.contains(&q));
            }
        }
    }
}
