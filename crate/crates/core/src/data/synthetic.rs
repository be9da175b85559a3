//! Synthetic scenes built from axis-aligned rectangles, with known extrinsics.
//!
//! The LiDAR frame uses camera-style axes (x right, y down, z forward). Points are
//! sampled ring by ring, top ring first, sweeping left to right, so depth jumps in scan
//! order occur where a ring crosses a vertical surface border. The image is rendered by
//! casting one ray per pixel centre through the same surfaces under the true extrinsics.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::GrayImage;
use crate::geometry::{CameraIntrinsics, EulerAngles, PointCloud, RigidTransform};
use crate::problem::{CalibrationBounds, CalibrationScene, FeatureSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Rectangle lying in the plane `axis = offset`. `a` and `b` bound the two remaining
/// coordinates in cyclic order: (y, z) for X, (z, x) for Y, (x, y) for Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub axis: Axis,
    pub offset: f64,
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub luminance: u8,
    pub reflectance: f64,
}

impl Rectangle {
    /// Frontal rectangle at depth `z` spanning `x` and `y`.
    pub fn frontal(z: f64, x: [f64; 2], y: [f64; 2], luminance: u8, reflectance: f64) -> Self {
        Self {
            axis: Axis::Z,
            offset: z,
            a: x,
            b: y,
            luminance,
            reflectance,
        }
    }

    fn indices(&self) -> (usize, usize, usize) {
        match self.axis {
            Axis::X => (0, 1, 2),
            Axis::Y => (1, 2, 0),
            Axis::Z => (2, 0, 1),
        }
    }

    /// Ray parameter of the hit, if the ray meets the rectangle in front of its origin.
    fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let (n, i, j) = self.indices();
        if dir[n].abs() < 1e-12 {
            return None;
        }
        let t = (self.offset - origin[n]) / dir[n];
        if t <= 1e-9 {
            return None;
        }
        let p = origin + dir * t;
        let inside = |v: f64, r: [f64; 2]| v >= r[0] && v <= r[1];
        (inside(p[i], self.a) && inside(p[j], self.b)).then_some(t)
    }
}

/// Spinning scanner: `rings` elevation channels evenly spaced over `elevation_deg`
/// (top first), each sampled across `azimuth_deg` at `azimuth_step_deg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScannerModel {
    pub rings: usize,
    pub elevation_deg: [f64; 2],
    pub azimuth_deg: [f64; 2],
    pub azimuth_step_deg: f64,
    pub range_noise: f64,
    pub max_range: f64,
    /// Roll of the scan pattern about the forward axis, so rings cross horizontal
    /// borders as well as vertical ones.
    #[serde(default)]
    pub roll_deg: f64,
}

impl Default for ScannerModel {
    fn default() -> Self {
        Self {
            rings: 96,
            elevation_deg: [-22.0, 22.0],
            azimuth_deg: [-40.0, 40.0],
            azimuth_step_deg: 0.1,
            range_noise: 0.005,
            max_range: 120.0,
            roll_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub surfaces: Vec<Rectangle>,
    pub scanner: ScannerModel,
    /// Luminance of pixels whose ray hits no surface.
    pub sky_luminance: u8,
}

impl SceneLayout {
    pub const NAMES: [&'static str; 3] = ["posts", "wall", "boxes"];

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "wall" => Ok(Self::wall()),
            "posts" => Ok(Self::posts()),
            "boxes" => Ok(Self::boxes()),
            _ => Err(Error::invalid(format!(
                "unknown layout `{name}`, expected one of {:?}",
                Self::NAMES
            ))),
        }
    }

    /// Free-standing posts and panels at several depths plus one small bright sign.
    pub fn wall() -> Self {
        let f = Rectangle::frontal;
        Self {
            surfaces: vec![
                f(6.6, [-3.5, -3.0], [-1.6, 1.8], 150, 0.35),
                f(9.5, [-1.9, -1.5], [-2.2, 0.8], 95, 0.3),
                f(5.4, [-0.2, 0.3], [-1.2, 1.5], 120, 0.4),
                f(12.5, [1.5, 2.0], [-3.0, -0.5], 170, 0.25),
                f(12.5, [3.0, 3.5], [-2.0, 1.5], 130, 0.25),
                f(8.0, [1.2, 1.6], [-0.6, 2.4], 140, 0.3),
                f(14.0, [-6.5, -6.0], [-1.0, 2.5], 135, 0.3),
                f(14.0, [-5.0, -4.5], [-2.5, 0.5], 100, 0.3),
                f(11.0, [4.4, 4.9], [0.5, 3.5], 110, 0.3),
                f(3.0, [-1.6, -1.3], [-0.9, 0.2], 160, 0.3),
                f(4.2, [1.8, 2.1], [-0.4, 0.5], 100, 0.3),
                f(2.0, [-1.2, -1.05], [0.15, 0.27], 250, 0.9),
            ],
            scanner: ScannerModel::default(),
            sky_luminance: 30,
        }
    }

    /// Eighteen posts spread across the view at distinct depths plus one small bright sign.
    pub fn posts() -> Self {
        let f = Rectangle::frontal;
        Self {
            surfaces: vec![
                f(3.0, [-1.92, -1.67], [-0.9, 0.3], 95, 0.3),
                f(7.9, [-4.43, -3.93], [0.0, 1.74], 135, 0.3),
                f(12.8, [-6.05, -5.7], [-0.77, 4.35], 175, 0.3),
                f(5.1, [-2.28, -1.68], [-0.61, 0.82], 95, 0.3),
                f(10.0, [-3.4, -2.95], [-1.8, 2.8], 135, 0.3),
                f(14.9, [-3.83, -3.53], [-3.58, 1.49], 175, 0.3),
                f(7.2, [-1.55, -1.0], [-2.16, 1.58], 95, 0.3),
                f(12.1, [-1.48, -1.08], [0.0, 4.11], 135, 0.3),
                f(4.4, [-0.28, -0.03], [-0.26, 0.7], 175, 0.3),
                f(9.3, [0.08, 0.58], [-1.12, 2.6], 95, 0.3),
                f(14.2, [1.33, 1.68], [-2.56, 1.42], 135, 0.3),
                f(6.5, [0.85, 1.45], [-1.56, 1.43], 175, 0.3),
                f(11.4, [2.59, 3.04], [-3.42, 3.88], 95, 0.3),
                f(3.7, [1.03, 1.33], [0.0, 0.59], 135, 0.3),
                f(8.6, [3.06, 3.61], [-0.52, 2.41], 175, 0.3),
                f(13.5, [5.99, 6.39], [-1.62, 1.35], 95, 0.3),
                f(5.8, [2.95, 3.2], [-1.04, 1.28], 135, 0.3),
                f(10.7, [6.17, 6.67], [-2.57, 3.64], 175, 0.3),
                f(2.0, [-1.2, -1.05], [0.15, 0.27], 250, 0.9),
            ],
            scanner: ScannerModel::default(),
            sky_luminance: 30,
        }
    }

    /// Three solid boxes whose side faces are visible, plus one small bright sign.
    pub fn boxes() -> Self {
        let mut surfaces = Vec::new();
        for (x, y, z, size, lum) in [
            ([-3.0, -1.5], [-0.5, 1.8], 7.0, 1.5, [150u8, 110, 170]),
            ([0.5, 1.5], [-1.5, 1.8], 5.5, 1.0, [90, 160, 120]),
            ([2.5, 4.5], [0.0, 1.8], 10.0, 2.0, [130, 170, 95]),
        ] {
            let zr = [z, z + size];
            surfaces.push(Rectangle::frontal(z, x, y, lum[0], 0.3));
            for side_x in x {
                surfaces.push(Rectangle {
                    axis: Axis::X,
                    offset: side_x,
                    a: y,
                    b: zr,
                    luminance: lum[1],
                    reflectance: 0.3,
                });
            }
            surfaces.push(Rectangle {
                axis: Axis::Y,
                offset: y[0],
                a: zr,
                b: x,
                luminance: lum[2],
                reflectance: 0.3,
            });
        }
        surfaces.push(Rectangle::frontal(3.5, [-1.0, -0.75], [-1.2, -1.0], 250, 0.9));
        Self {
            surfaces,
            scanner: ScannerModel::default(),
            sky_luminance: 30,
        }
    }

    fn first_hit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, &Rectangle)> {
        self.surfaces
            .iter()
            .filter_map(|s| s.intersect(origin, dir).map(|t| (t, s)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

/// Camera used for the bundled synthetic scenes.
pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(500.0, 500.0, 320.0, 180.0).expect("valid constants")
}

pub const DEFAULT_IMAGE_SIZE: (usize, usize) = (640, 360);

/// Slightly misaligned mounting used as the synthetic ground truth.
pub fn default_true_extrinsics() -> RigidTransform {
    RigidTransform::from_euler_translation(
        EulerAngles::from_degrees(0.5, -0.8, 0.3),
        Vector3::new(0.05, -0.10, 0.08),
    )
    .expect("finite constants")
}

/// Scans and renders `layout`. The returned scene has `initial == ground_truth ==
/// true_extrinsics`. Point coordinates are rounded to `f32` so the scene survives a
/// round trip through the KITTI format unchanged.
pub fn generate_synthetic_scene(
    seed: u64,
    layout: &SceneLayout,
    intrinsics: CameraIntrinsics,
    image_size: (usize, usize),
    true_extrinsics: RigidTransform,
    settings: FeatureSettings,
) -> Result<CalibrationScene> {
    intrinsics.validate()?;
    let (width, height) = image_size;
    if width < 3 || height < 3 {
        return Err(Error::invalid(format!("image {width}x{height} is too small")));
    }
    let sc = &layout.scanner;
    if sc.rings == 0 || !(sc.azimuth_step_deg > 0.0) || !(sc.range_noise >= 0.0) {
        return Err(Error::invalid("scanner needs rings, a positive azimuth step and non-negative noise"));
    }

    let inv = true_extrinsics.inverse();
    let cam_origin = inv.translation;
    let mut image = GrayImage::filled(width, height, layout.sky_luminance);
    let mut covered = 0usize;
    for y in 0..height {
        for x in 0..width {
            let ray = Vector3::new(
                (x as f64 - intrinsics.u0) / intrinsics.fx,
                (y as f64 - intrinsics.v0) / intrinsics.fy,
                1.0,
            );
            if let Some((_, s)) = layout.first_hit(&cam_origin, &(inv.rotation * ray)) {
                image.set(x, y, s.luminance);
                covered += 1;
            }
        }
    }
    if covered == 0 {
        return Err(Error::invalid("no surface lies in the camera frustum"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sc.range_noise).map_err(|e| Error::invalid(e.to_string()))?;
    let steps = ((sc.azimuth_deg[1] - sc.azimuth_deg[0]) / sc.azimuth_step_deg).floor() as usize + 1;
    let (sr, cr) = sc.roll_deg.to_radians().sin_cos();
    let mut points = Vec::new();
    let mut intensities = Vec::new();
    for ring in 0..sc.rings {
        let frac = if sc.rings == 1 { 0.5 } else { ring as f64 / (sc.rings - 1) as f64 };
        let el = (sc.elevation_deg[1] - frac * (sc.elevation_deg[1] - sc.elevation_deg[0])).to_radians();
        for k in 0..steps {
            let az = (sc.azimuth_deg[0] + k as f64 * sc.azimuth_step_deg).to_radians();
            let (dx, dy) = (el.cos() * az.sin(), -el.sin());
            let dir = Vector3::new(cr * dx - sr * dy, sr * dx + cr * dy, el.cos() * az.cos());
            let jitter = noise.sample(&mut rng);
            let Some((t, s)) = layout.first_hit(&Vector3::zeros(), &dir) else {
                continue;
            };
            if t > sc.max_range {
                continue;
            }
            let p = dir * (t + jitter);
            points.push(p.map(|v| v as f32 as f64));
            let r = (s.reflectance + rng.random_range(-0.02..0.02)).clamp(0.0, 1.0);
            intensities.push(r as f32 as f64);
        }
    }
    if points.is_empty() {
        return Err(Error::invalid("the scanner sees no surface"));
    }
    let cloud = PointCloud::new(points, intensities)?;
    CalibrationScene::new(cloud, image, intrinsics, true_extrinsics, Some(true_extrinsics), settings)
}

/// A deliberate offset applied to known-good extrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decalibration {
    pub rotation_degrees: f64,
    pub translation_meters: f64,
    pub seed: u64,
    /// Correction genome `[x, y, z, yaw, pitch, roll]` (metres, radians) that maps the
    /// decalibrated extrinsics back onto the truth.
    pub perturbation: [f64; 6],
}

impl Decalibration {
    pub fn transform(&self) -> RigidTransform {
        let p = self.perturbation;
        RigidTransform::from_euler_translation(EulerAngles::new(p[5], p[4], p[3]), Vector3::new(p[0], p[1], p[2]))
            .expect("finite perturbation")
    }
}

/// Draws a sign per axis and offsets every rotation angle by `rotation_degrees` and
/// every translation component by `translation_meters`. Returns `delta^-1 * truth`, so
/// composing the recorded perturbation with the result recovers `truth`.
pub fn decalibrate(
    truth: &RigidTransform,
    magnitudes: (f64, f64),
    seed: u64,
) -> Result<(RigidTransform, Decalibration)> {
    let (rot, trans) = magnitudes;
    let limits = CalibrationBounds::standard(1);
    if !(0.0..=limits.rotation.to_degrees() + 1e-9).contains(&rot) || !(0.0..=limits.translation).contains(&trans) {
        return Err(Error::invalid(format!(
            "decalibration ({rot} deg, {trans} m) outside [0, {:.0} deg] x [0, {} m]",
            limits.rotation.to_degrees(),
            limits.translation
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sign = || if rng.random::<bool>() { 1.0 } else { -1.0 };
    let rot = rot.to_radians().min(limits.rotation);
    let perturbation = [
        sign() * trans,
        sign() * trans,
        sign() * trans,
        sign() * rot,
        sign() * rot,
        sign() * rot,
    ];
    let record = Decalibration {
        rotation_degrees: magnitudes.0,
        translation_meters: trans,
        seed,
        perturbation,
    };
    Ok((record.transform().inverse().compose(truth), record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project_to_pixel;

    fn small_layout(surfaces: Vec<Rectangle>) -> SceneLayout {
        SceneLayout {
            surfaces,
            scanner: ScannerModel {
                rings: 16,
                azimuth_step_deg: 0.5,
                ..ScannerModel::default()
            },
            sky_luminance: 0,
        }
    }

    #[test]
    fn frontal_wall_edges_trace_its_outline() {
        let wall = Rectangle::frontal(10.0, [-2.0, 3.0], [-1.0, 2.0], 200, 0.5);
        let k = default_intrinsics();
        let scene = generate_synthetic_scene(
            1,
            &small_layout(vec![wall]),
            k,
            DEFAULT_IMAGE_SIZE,
            RigidTransform::identity(),
            FeatureSettings::default(),
        )
        .unwrap();
        let corner = |x: f64, y: f64| project_to_pixel(&k, &Vector3::new(x, y, 10.0)).unwrap();
        let (tl, br) = (corner(-2.0, -1.0), corner(3.0, 2.0));
        assert_eq!((tl.u, tl.v, br.u, br.v), (220.0, 130.0, 470.0, 280.0));
        for p in &scene.gt_edges.points {
            let on_vertical = (p[0] - tl.u).abs() <= 1.0 || (p[0] - br.u).abs() <= 1.0;
            let on_horizontal = (p[1] - tl.v).abs() <= 1.0 || (p[1] - br.v).abs() <= 1.0;
            assert!(on_vertical || on_horizontal, "stray edge pixel {p:?}");
            assert!(p[0] >= tl.u - 1.0 && p[0] <= br.u + 1.0 && p[1] >= tl.v - 1.0 && p[1] <= br.v + 1.0);
        }
        // every outline pixel is detected
        let perimeter = 2.0 * ((br.u - tl.u) + (br.v - tl.v));
        assert!(scene.gt_edges.len() as f64 >= 2.0 * perimeter - 8.0);
    }

    #[test]
    fn same_seed_same_scene() {
        let gen = |seed| {
            generate_synthetic_scene(
                seed,
                &SceneLayout::wall(),
                default_intrinsics(),
                DEFAULT_IMAGE_SIZE,
                default_true_extrinsics(),
                FeatureSettings::default(),
            )
            .unwrap()
        };
        let (a, b) = (gen(3), gen(3));
        assert_eq!(a.cloud, b.cloud);
        assert_eq!(a.image, b.image);
        assert_ne!(a.cloud, gen(4).cloud);
        assert!(a.has_intensity());
    }

    #[test]
    fn empty_frustum_is_rejected() {
        let behind = Rectangle::frontal(-5.0, [-1.0, 1.0], [-1.0, 1.0], 200, 0.5);
        let r = generate_synthetic_scene(
            0,
            &small_layout(vec![behind]),
            default_intrinsics(),
            DEFAULT_IMAGE_SIZE,
            RigidTransform::identity(),
            FeatureSettings::default(),
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn layouts_by_name() {
        for name in SceneLayout::NAMES {
            assert!(SceneLayout::by_name(name).is_ok());
        }
        assert!(SceneLayout::by_name("forest").is_err());
    }

    #[test]
    fn zero_decalibration_is_identity() {
        let truth = default_true_extrinsics();
        let (init, rec) = decalibrate(&truth, (0.0, 0.0), 9).unwrap();
        assert_eq!(rec.perturbation.map(f64::abs), [0.0; 6]);
        let d = init.compose(&truth.inverse());
        assert!((d.rotation - nalgebra::Matrix3::identity()).abs().max() < 1e-12);
        assert!(d.translation.abs().max() < 1e-12);
    }

    #[test]
    fn bound_magnitudes_land_on_the_bound_surface() {
        let truth = default_true_extrinsics();
        let (init, rec) = decalibrate(&truth, (25.0, 1.5), 2).unwrap();
        let b = CalibrationBounds::standard(1000);
        for (i, v) in rec.perturbation.iter().enumerate() {
            let bound = if i < 3 { b.translation } else { b.rotation };
            assert!((v.abs() - bound).abs() < 1e-12);
        }
        let back = rec.transform().compose(&init);
        assert!((back.rotation - truth.rotation).abs().max() < 1e-9);
        assert!((back.translation - truth.translation).abs().max() < 1e-9);
        assert!(decalibrate(&truth, (26.0, 0.0), 0).is_err());
        assert!(decalibrate(&truth, (0.0, -0.1), 0).is_err());
    }

    #[test]
    fn recovering_genome_is_the_perturbation() {
        let truth = default_true_extrinsics();
        let (init, rec) = decalibrate(&truth, (20.0, 1.0), 11).unwrap();
        let mut scene = generate_synthetic_scene(
            0,
            &small_layout(SceneLayout::wall().surfaces),
            default_intrinsics(),
            DEFAULT_IMAGE_SIZE,
            truth,
            FeatureSettings::default(),
        )
        .unwrap();
        scene.initial = init;
        let g = scene.ground_truth_genome().unwrap();
        for (a, b) in g.iter().zip(rec.perturbation) {
            assert!((a - b).abs() < 1e-9, "{g:?} vs {:?}", rec.perturbation);
        }
    }
}
