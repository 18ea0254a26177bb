//! Analytic scenes and paired sonar / camera rendering with exact ground truth.
//!
//! Scenes are built from finite solid cylinders and oriented boxes. Preset
//! scenes use a z-up world with x pointing away from the sensors' default
//! position at the origin.

use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::format::{self, FormatError};
use crate::geometry::{
    canonical_extrinsics, join, spherical_to_cartesian, Calibration, CameraIntrinsics, Point3, RigidTransform,
    SonarAperture, SphericalPoint,
};
use crate::raster::CameraImage;
use crate::sonar::SonarFrame;
use crate::turbidity::Rgb;

/// Rays must travel at least this far before a hit counts.
const MIN_HIT_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Solid cylinder with flat caps; `axis` is unit length.
    Cylinder {
        center: Point3,
        axis: Vector3<f64>,
        radius: f64,
        half_length: f64,
    },
    /// Oriented box; `rotation` maps box axes into the world.
    Box {
        center: Point3,
        half_extents: Vector3<f64>,
        rotation: Matrix3<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePrimitive {
    pub shape: Shape,
    /// Reflectivity in `[0, 1]` for both sensors.
    pub material: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("scene has no primitives")]
    Empty,
    #[error("primitive {0}: {1}")]
    InvalidPrimitive(usize, String),
}

impl ScenePrimitive {
    pub fn cylinder(center: Point3, axis: Vector3<f64>, radius: f64, half_length: f64, material: f64) -> Self {
        Self {
            shape: Shape::Cylinder {
                center,
                axis: axis.normalize(),
                radius,
                half_length,
            },
            material,
        }
    }

    pub fn aligned_box(center: Point3, half_extents: Vector3<f64>, material: f64) -> Self {
        Self {
            shape: Shape::Box {
                center,
                half_extents,
                rotation: Matrix3::identity(),
            },
            material,
        }
    }

    fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.material) {
            return Err("material must lie in [0, 1]".into());
        }
        match &self.shape {
            Shape::Cylinder {
                axis,
                radius,
                half_length,
                ..
            } => {
                if !(*radius > 0.0 && *half_length > 0.0) {
                    return Err("cylinder radius and half-length must be positive".into());
                }
                if (axis.norm() - 1.0).abs() > 1e-9 {
                    return Err("cylinder axis must be unit length".into());
                }
            }
            Shape::Box {
                half_extents,
                rotation,
                ..
            } => {
                if half_extents.iter().any(|&h| !(h > 0.0)) {
                    return Err("box half-extents must be positive".into());
                }
                RigidTransform::new(*rotation, Vector3::zeros()).map_err(|e| e.to_string())?;
            }
        }
        Ok(())
    }

    /// Nearest forward intersection: distance along `dir` and outward normal.
    pub fn intersect(&self, origin: &Point3, dir: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
        match &self.shape {
            Shape::Cylinder {
                center,
                axis,
                radius,
                half_length,
            } => intersect_cylinder(origin, dir, center, axis, *radius, *half_length),
            Shape::Box {
                center,
                half_extents,
                rotation,
            } => intersect_box(origin, dir, center, half_extents, rotation),
        }
    }

    /// Unsigned distance from `p` to the primitive's surface.
    pub fn surface_distance(&self, p: &Point3) -> f64 {
        match &self.shape {
            Shape::Cylinder {
                center,
                axis,
                radius,
                half_length,
            } => {
                let d = p - center;
                let a = d.dot(axis);
                let rho = (d - a * axis).norm();
                let (da, dr) = (a.abs() - half_length, rho - radius);
                if da <= 0.0 && dr <= 0.0 {
                    -(da.max(dr))
                } else {
                    (da.max(0.0).powi(2) + dr.max(0.0).powi(2)).sqrt()
                }
            }
            Shape::Box {
                center,
                half_extents,
                rotation,
            } => {
                let q = rotation.transpose() * (p - center);
                let d = q.abs() - half_extents;
                let outside = d.map(|v| v.max(0.0)).norm();
                if outside > 0.0 {
                    outside
                } else {
                    -d.max()
                }
            }
        }
    }

    fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        match &self.shape {
            Shape::Cylinder {
                center,
                axis,
                radius,
                half_length,
            } => {
                let ext = axis.map(|a| a.abs() * half_length + radius * (1.0 - a * a).max(0.0).sqrt());
                (center.coords - ext, center.coords + ext)
            }
            Shape::Box {
                center,
                half_extents,
                rotation,
            } => {
                let ext = rotation.abs() * half_extents;
                (center.coords - ext, center.coords + ext)
            }
        }
    }
}

fn intersect_cylinder(
    origin: &Point3,
    dir: &Vector3<f64>,
    center: &Point3,
    axis: &Vector3<f64>,
    radius: f64,
    half_length: f64,
) -> Option<(f64, Vector3<f64>)> {
    let d = origin - center;
    let (da, va) = (d.dot(axis), dir.dot(axis));
    let dp = d - da * axis;
    let vp = dir - va * axis;
    let mut best: Option<(f64, Vector3<f64>)> = None;
    let mut consider = |t: f64, n: Vector3<f64>| {
        if t > MIN_HIT_DISTANCE && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, n));
        }
    };

    let a = vp.norm_squared();
    if a > 1e-18 {
        let b = dp.dot(&vp);
        let c = dp.norm_squared() - radius * radius;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // numerically stable pair of roots
            let q = -(b + b.signum() * sq);
            let roots = if q != 0.0 { [q / a, c / q] } else { [-b / a, -b / a] };
            for t in roots {
                if (da + t * va).abs() <= half_length {
                    consider(t, (dp + t * vp) / radius);
                }
            }
        }
    }
    if va.abs() > 1e-18 {
        for s in [half_length, -half_length] {
            let t = (s - da) / va;
            if (dp + t * vp).norm_squared() <= radius * radius {
                consider(t, axis * s.signum());
            }
        }
    }
    best
}

fn intersect_box(
    origin: &Point3,
    dir: &Vector3<f64>,
    center: &Point3,
    half: &Vector3<f64>,
    rotation: &Matrix3<f64>,
) -> Option<(f64, Vector3<f64>)> {
    let rt = rotation.transpose();
    let o = rt * (origin - center);
    let v = rt * dir;
    let (mut t_near, mut t_far) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut near_axis, mut far_axis) = (0usize, 0usize);
    for i in 0..3 {
        if v[i].abs() < 1e-18 {
            if o[i].abs() > half[i] {
                return None;
            }
            continue;
        }
        let t1 = (-half[i] - o[i]) / v[i];
        let t2 = (half[i] - o[i]) / v[i];
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        if lo > t_near {
            t_near = lo;
            near_axis = i;
        }
        if hi < t_far {
            t_far = hi;
            far_axis = i;
        }
    }
    if t_near > t_far || t_far <= MIN_HIT_DISTANCE {
        return None;
    }
    let (t, axis) = if t_near > MIN_HIT_DISTANCE {
        (t_near, near_axis)
    } else {
        (t_far, far_axis)
    };
    let local_hit = o[axis] + t * v[axis];
    let mut n = Vector3::zeros();
    n[axis] = local_hit.signum();
    Some((t, rotation * n))
}

/// A collection of primitives with its axis-aligned bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel {
    primitives: Vec<ScenePrimitive>,
    bounds_min: Vector3<f64>,
    bounds_max: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub primitive: usize,
    /// Outward surface normal at the hit.
    pub normal: Vector3<f64>,
}

impl SceneModel {
    pub fn new(primitives: Vec<ScenePrimitive>) -> Result<Self, SceneError> {
        if primitives.is_empty() {
            return Err(SceneError::Empty);
        }
        for (i, p) in primitives.iter().enumerate() {
            p.validate().map_err(|m| SceneError::InvalidPrimitive(i, m))?;
        }
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in &primitives {
            let (a, b) = p.bounds();
            lo = lo.inf(&a);
            hi = hi.sup(&b);
        }
        Ok(Self {
            primitives,
            bounds_min: lo,
            bounds_max: hi,
        })
    }

    pub fn primitives(&self) -> &[ScenePrimitive] {
        &self.primitives
    }

    /// World-frame axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        (self.bounds_min, self.bounds_max)
    }

    /// Apply a rigid transform to every primitive.
    pub fn transformed(&self, tf: &RigidTransform) -> SceneModel {
        let prims = self
            .primitives
            .iter()
            .map(|p| {
                let shape = match p.shape {
                    Shape::Cylinder {
                        center,
                        axis,
                        radius,
                        half_length,
                    } => Shape::Cylinder {
                        center: tf.apply(&center),
                        axis: tf.apply_vector(&axis),
                        radius,
                        half_length,
                    },
                    Shape::Box {
                        center,
                        half_extents,
                        rotation,
                    } => Shape::Box {
                        center: tf.apply(&center),
                        half_extents,
                        rotation: tf.rotation() * rotation,
                    },
                };
                ScenePrimitive {
                    shape,
                    material: p.material,
                }
            })
            .collect();
        SceneModel::new(prims).expect("rigid motion preserves validity")
    }
}

/// Nearest positive hit of the ray `origin + t·dir` (`dir` unit length).
pub fn ray_distance(scene: &SceneModel, origin: &Point3, dir: &Vector3<f64>) -> Option<RayHit> {
    scene
        .primitives
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            p.intersect(origin, dir).map(|(distance, normal)| RayHit {
                distance,
                primitive: i,
                normal,
            })
        })
        .min_by(|a, b| a.distance.total_cmp(&b.distance))
}

/// Shortest distance from `p` to any primitive surface.
pub fn distance_to_scene(scene: &SceneModel, p: &Point3) -> f64 {
    scene
        .primitives
        .iter()
        .map(|prim| prim.surface_distance(p))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Additive uniform noise drawn from `[0, amplitude)`.
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            amplitude: 0.05,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SonarRenderParams {
    pub aperture: SonarAperture,
    pub num_beams: usize,
    pub num_bins: usize,
    /// Elevation rays per beam, spread uniformly over the vertical aperture.
    pub elevation_samples: usize,
    pub noise: NoiseParams,
}

/// Ray-cast a sonar frame. `world_from_sonar` places the sonar in the scene.
///
/// Each beam fires `elevation_samples` rays; a hit deposits
/// `material · cos(incidence)` into its range bin, keeping the maximum per
/// bin. Seeded uniform noise is added afterwards.
pub fn render_sonar(
    scene: &SceneModel,
    world_from_sonar: &RigidTransform,
    params: &SonarRenderParams,
) -> SonarFrame {
    let mut frame = SonarFrame::zeros(params.aperture, params.num_beams, params.num_bins)
        .expect("render parameters describe a valid frame");
    let (phi_lo, phi_hi) = (params.aperture.phi_min(), params.aperture.phi_max());
    let n_el = params.elevation_samples.max(1);
    let origin = Point3::from(*world_from_sonar.translation());
    let bearings = frame.bearings().to_vec();
    let bins = params.num_bins;
    let bl = frame.bin_length();
    let cells = frame.intensities_mut();
    for (b, &theta) in bearings.iter().enumerate() {
        for j in 0..n_el {
            let phi = if n_el == 1 {
                0.0
            } else {
                phi_lo + (phi_hi - phi_lo) * j as f64 / (n_el - 1) as f64
            };
            let dir_s = spherical_to_cartesian(&SphericalPoint::new(1.0, theta, phi)).coords;
            let dir = world_from_sonar.apply_vector(&dir_s);
            let Some(hit) = ray_distance(scene, &origin, &dir) else {
                continue;
            };
            let bin = (hit.distance / bl).floor();
            if bin >= bins as f64 {
                continue;
            }
            let shade = scene.primitives[hit.primitive].material * (-hit.normal.dot(&dir)).clamp(0.0, 1.0);
            let cell = &mut cells[b * bins + bin as usize];
            *cell = cell.max(shade);
        }
    }
    if params.noise.amplitude > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(params.noise.seed);
        for c in cells.iter_mut() {
            *c = (*c + params.noise.amplitude * rng.random::<f64>()).min(1.0);
        }
    }
    frame
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRenderParams {
    pub background: Rgb,
    /// Fraction of the material brightness seen regardless of incidence.
    pub ambient: f64,
}

impl Default for CameraRenderParams {
    fn default() -> Self {
        Self {
            background: Rgb::new(0.10, 0.22, 0.25),
            ambient: 0.3,
        }
    }
}

/// Per-pixel primitive index + 1, or 0 where the ray hit nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilhouetteMask {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
}

impl SilhouetteMask {
    pub fn primitive_mask(&self, primitive: usize) -> Vec<bool> {
        self.labels.iter().map(|&l| l == primitive as u32 + 1).collect()
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let bytes: Vec<u8> = self.labels.iter().map(|&l| l.min(255) as u8).collect();
        crate::raster::encode_pnm(self.width, self.height, 1, &bytes)
    }
}

pub struct CameraRendering {
    pub image: CameraImage,
    pub silhouettes: SilhouetteMask,
}

/// Ray-cast an RGB image through every pixel centre with a head-mounted light.
pub fn render_camera(
    scene: &SceneModel,
    world_from_camera: &RigidTransform,
    k: &CameraIntrinsics,
    params: &CameraRenderParams,
) -> CameraRendering {
    let (w, h) = (k.width, k.height);
    let origin = Point3::from(*world_from_camera.translation());
    let bg = params.background.to_array();
    let mut data = Vec::with_capacity(w * h * 3);
    let mut labels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let ray_c = Vector3::new((x as f64 - k.cu) / k.fx, (y as f64 - k.cv) / k.fy, 1.0).normalize();
            let dir = world_from_camera.apply_vector(&ray_c);
            match ray_distance(scene, &origin, &dir) {
                Some(hit) => {
                    let cos_i = (-hit.normal.dot(&dir)).clamp(0.0, 1.0);
                    let m = scene.primitives[hit.primitive].material;
                    let shade = m * (params.ambient + (1.0 - params.ambient) * cos_i);
                    data.extend_from_slice(&[shade; 3]);
                    labels.push(hit.primitive as u32 + 1);
                }
                None => {
                    data.extend_from_slice(&bg);
                    labels.push(0);
                }
            }
        }
    }
    CameraRendering {
        image: CameraImage::from_raw_clamped(w, h, 3, data),
        silhouettes: SilhouetteMask {
            width: w,
            height: h,
            labels,
        },
    }
}

/// Camera at `position` looking along world +x with world +z up.
pub fn forward_camera_pose(position: Vector3<f64>) -> RigidTransform {
    // columns: camera x (right) = −y, camera y (down) = −z, camera z = +x
    let r = Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
    RigidTransform::new(r, position).expect("constant proper rotation")
}

/// The bundled rig: a 640×480 camera with 500 px focal length and a
/// co-located sonar of 70° × 12° aperture and 3 m range, mounted canonically.
pub fn default_calibration() -> Calibration {
    Calibration {
        intrinsics: CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).expect("valid intrinsics"),
        extrinsics: canonical_extrinsics(),
        sonar: SonarAperture::from_degrees(70.0, 12.0, 3.0).expect("valid aperture"),
    }
}

/// Sonar frame geometry and noise for [`render_pair`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairParams {
    pub num_beams: usize,
    pub num_bins: usize,
    pub elevation_samples: usize,
    pub noise: NoiseParams,
    pub camera: CameraRenderParams,
}

impl Default for PairParams {
    fn default() -> Self {
        Self {
            num_beams: 512,
            num_bins: 512,
            elevation_samples: 121,
            noise: NoiseParams::default(),
            camera: CameraRenderParams::default(),
        }
    }
}

/// Render a paired sonar frame and camera image for a camera pose; the sonar
/// pose follows from the calibration's extrinsics.
pub fn render_pair(
    scene: &SceneModel,
    world_from_camera: &RigidTransform,
    calib: &Calibration,
    params: &PairParams,
) -> (SonarFrame, CameraRendering) {
    let world_from_sonar = world_from_camera.compose(&calib.extrinsics);
    let sonar = render_sonar(
        scene,
        &world_from_sonar,
        &SonarRenderParams {
            aperture: calib.sonar,
            num_beams: params.num_beams,
            num_bins: params.num_bins,
            elevation_samples: params.elevation_samples,
            noise: params.noise,
        },
    );
    let camera = render_camera(scene, world_from_camera, &calib.intrinsics, &params.camera);
    (sonar, camera)
}

/// Four vertical pilings of radius 0.1 m, 0.5 m apart, 1.5 m ahead.
pub fn pier_scene() -> SceneModel {
    let prims = [0.75, 0.25, -0.25, -0.75]
        .iter()
        .map(|&y| ScenePrimitive::cylinder(Point3::new(1.5, y, 0.0), Vector3::z(), 0.1, 1.5, 0.8))
        .collect();
    SceneModel::new(prims).expect("preset is valid")
}

/// A back wall 2.15 m ahead with seven 0.15 m ribs protruding 0.2 m.
pub fn seawall_scene() -> SceneModel {
    let mut prims = vec![ScenePrimitive::aligned_box(
        Point3::new(2.2, 0.0, 0.0),
        Vector3::new(0.05, 2.5, 1.5),
        0.7,
    )];
    for k in 0..7 {
        let y = f64::from(4 * k - 12) / 10.0;
        prims.push(ScenePrimitive::aligned_box(
            Point3::new(2.05, y, 0.0),
            Vector3::new(0.1, 0.075, 1.5),
            0.75,
        ));
    }
    SceneModel::new(prims).expect("preset is valid")
}

impl SceneModel {
    /// Parse a scene file: one primitive per line.
    ///
    /// ```text
    /// cylinder cx cy cz ax ay az radius half_length material
    /// box cx cy cz hx hy hz r00 r01 r02 r10 r11 r12 r20 r21 r22 material
    /// ```
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut prims = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = format::strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let (kind, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let v = format::parse_floats(rest).map_err(|m| FormatError::line(i + 1, m))?;
            let need = |n: usize| {
                if v.len() == n {
                    Ok(())
                } else {
                    Err(FormatError::line(
                        i + 1,
                        format!("`{kind}` takes {n} numbers, got {}", v.len()),
                    ))
                }
            };
            let prim = match kind {
                "cylinder" => {
                    need(9)?;
                    let axis = Vector3::new(v[3], v[4], v[5]);
                    if !(axis.norm() > 0.0) {
                        return Err(FormatError::line(i + 1, "cylinder axis must be non-zero"));
                    }
                    ScenePrimitive::cylinder(Point3::new(v[0], v[1], v[2]), axis, v[6], v[7], v[8])
                }
                "box" => {
                    need(16)?;
                    ScenePrimitive {
                        shape: Shape::Box {
                            center: Point3::new(v[0], v[1], v[2]),
                            half_extents: Vector3::new(v[3], v[4], v[5]),
                            rotation: Matrix3::from_row_slice(&v[6..15]),
                        },
                        material: v[15],
                    }
                }
                other => return Err(FormatError::line(i + 1, format!("unknown primitive `{other}`"))),
            };
            prims.push(prim);
        }
        SceneModel::new(prims).map_err(|e| FormatError::invalid(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        Self::parse(&format::read_text(path)?).map_err(|e| e.in_file(path))
    }

    /// A bundled preset by name, or a scene file.
    pub fn from_name_or_file(name: &str) -> Result<Self, FormatError> {
        match name {
            "pier" => Ok(pier_scene()),
            "seawall" => Ok(seawall_scene()),
            path => Self::read(Path::new(path)),
        }
    }
}

impl fmt::Display for SceneModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.primitives {
            match &p.shape {
                Shape::Cylinder {
                    center,
                    axis,
                    radius,
                    half_length,
                } => writeln!(
                    f,
                    "cylinder {} {} {} {} {}",
                    join(center.coords.as_slice()),
                    join(axis.as_slice()),
                    radius,
                    half_length,
                    p.material
                )?,
                Shape::Box {
                    center,
                    half_extents,
                    rotation,
                } => {
                    let rows: Vec<f64> = (0..3).flat_map(|r| (0..3).map(move |c| rotation[(r, c)])).collect();
                    writeln!(
                        f,
                        "box {} {} {} {}",
                        join(center.coords.as_slice()),
                        join(half_extents.as_slice()),
                        join(&rows),
                        p.material
                    )?
                }
            }
        }
        Ok(())
    }
}
