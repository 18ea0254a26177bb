//! Sensor frames, rigid transforms, and the camera and sonar projection models.
//!
//! Frame conventions used throughout the crate:
//!
//! * **sonar**: x forward, y starboard, z down. A return at range `r`,
//!   bearing `theta` and elevation `phi` lies at
//!   `r · (cos φ cos θ, cos φ sin θ, sin φ)`.
//! * **camera**: z forward (optical axis), x right, y down. Pixel `(u, v)`
//!   addresses the centre of column `u`, row `v`.
//! * **world**: any right-handed frame. Poses are `world_from_camera`.
//!
//! With these conventions the canonical mounting (sonar and camera sharing an
//! origin and a forward axis) is the proper rotation returned by
//! [`canonical_extrinsics`], and every beam of fixed bearing projects onto the
//! single image column `u = fx · tan θ + cu`.

use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::format::{self, FormatError};

pub type Point3 = nalgebra::Point3<f64>;

/// Orthonormality tolerance for rotation matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation is not a proper orthonormal matrix (deviation {0:.3e})")]
    InvalidRotation(f64),
    #[error("invalid sonar geometry: {0}")]
    InvalidSonar(String),
    #[error("non-finite transform component")]
    NonFinite,
}

/// Pinhole intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cu: f64,
    pub cv: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cu: f64,
        cv: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cu,
            cv,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidIntrinsics(m.to_string()));
        if !(self.fx > 0.0 && self.fx.is_finite() && self.fy > 0.0 && self.fy.is_finite()) {
            return bad("focal lengths must be positive and finite");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be non-zero");
        }
        if !(self.cu >= 0.0 && self.cu < self.width as f64) {
            return bad("cu must lie in [0, width)");
        }
        if !(self.cv >= 0.0 && self.cv < self.height as f64) {
            return bad("cv must lie in [0, height)");
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cu, 0.0, self.fy, self.cv, 0.0, 0.0, 1.0)
    }
}

/// Continuous image coordinates in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Nearest integer pixel, rounding halves up.
    pub fn rounded(&self) -> (i64, i64) {
        ((self.u + 0.5).floor() as i64, (self.v + 0.5).floor() as i64)
    }

    /// Rounded `(column, row)` if it falls inside a `width × height` image.
    pub fn cell(&self, width: usize, height: usize) -> Option<(usize, usize)> {
        let (u, v) = self.rounded();
        if u >= 0 && v >= 0 && (u as usize) < width && (v as usize) < height {
            Some((u as usize, v as usize))
        } else {
            None
        }
    }
}

/// A sonar-frame point in range / bearing / elevation form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl SphericalPoint {
    pub fn new(r: f64, theta: f64, phi: f64) -> Self {
        Self { r, theta, phi }
    }
}

/// Proper rigid transform `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Sonar → camera transform.
pub type Extrinsics = RigidTransform;

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = (rotation.determinant() - 1.0).abs();
        let dev = ortho.max(det);
        if dev > ROTATION_TOLERANCE {
            return Err(GeometryError::InvalidRotation(dev));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Build from a row-major rotation and a translation.
    pub fn from_rows(rot: [f64; 9], trans: [f64; 3]) -> Result<Self, GeometryError> {
        Self::new(Matrix3::from_row_slice(&rot), Vector3::from(trans))
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation_rows(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `Rᵀ (p − t)`.
    pub fn apply_inverse(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation.transpose() * (p - self.translation))
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Sonar and camera co-located, both looking forward.
///
/// Maps sonar x (forward) to camera z, sonar y (starboard) to camera x and
/// sonar z (down) to camera y.
pub fn canonical_extrinsics() -> Extrinsics {
    RigidTransform {
        rotation: Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0),
        translation: Vector3::zeros(),
    }
}

/// Sonar field-of-view limits. Angles are full apertures in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SonarAperture {
    pub horizontal: f64,
    pub vertical: f64,
    pub max_range: f64,
}

impl SonarAperture {
    pub fn from_degrees(h_deg: f64, v_deg: f64, max_range: f64) -> Result<Self, GeometryError> {
        let a = Self {
            horizontal: h_deg.to_radians(),
            vertical: v_deg.to_radians(),
            max_range,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok_angle = |a: f64| a > 0.0 && a < std::f64::consts::PI;
        if !ok_angle(self.horizontal) || !ok_angle(self.vertical) {
            return Err(GeometryError::InvalidSonar(
                "apertures must lie in (0°, 180°)".into(),
            ));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(GeometryError::InvalidSonar(
                "max range must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn phi_min(&self) -> f64 {
        -0.5 * self.vertical
    }

    pub fn phi_max(&self) -> f64 {
        0.5 * self.vertical
    }
}

/// Camera intrinsics, sonar → camera extrinsics and sonar aperture limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: Extrinsics,
    pub sonar: SonarAperture,
}

pub fn spherical_to_cartesian(p: &SphericalPoint) -> Point3 {
    let (sp, cp) = p.phi.sin_cos();
    let (st, ct) = p.theta.sin_cos();
    Point3::new(p.r * cp * ct, p.r * cp * st, p.r * sp)
}

pub fn transform_sonar_to_camera(p: &Point3, e: &Extrinsics) -> Point3 {
    e.apply(p)
}

pub fn project_to_pixel(p: &Point3, k: &CameraIntrinsics) -> Result<Pixel, GeometryError> {
    if !(p.z > 0.0) {
        return Err(GeometryError::BehindCamera(p.z));
    }
    Ok(Pixel {
        u: k.fx * p.x / p.z + k.cu,
        v: k.fy * p.y / p.z + k.cv,
    })
}

/// `z · K⁻¹ · (u, v, 1)`.
pub fn back_project(px: &Pixel, z: f64, k: &CameraIntrinsics) -> Result<Point3, GeometryError> {
    if !(z > 0.0) {
        return Err(GeometryError::NonPositiveDepth(z));
    }
    Ok(Point3::new(
        z * (px.u - k.cu) / k.fx,
        z * (px.v - k.cv) / k.fy,
        z,
    ))
}

const CALIB_KEYS: [&str; 11] = [
    "fx",
    "fy",
    "cu",
    "cv",
    "width",
    "height",
    "rot",
    "trans",
    "sonar_h_aperture_deg",
    "sonar_v_aperture_deg",
    "sonar_max_range_m",
];

impl Calibration {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut fx = None;
        let mut fy = None;
        let mut cu = None;
        let mut cv = None;
        let mut width = None;
        let mut height = None;
        let mut rot = None;
        let mut trans = None;
        let mut h_ap = None;
        let mut v_ap = None;
        let mut range = None;
        for e in format::parse_entries(text)? {
            match e.key {
                "fx" => fx = Some(e.parse::<f64>()?),
                "fy" => fy = Some(e.parse::<f64>()?),
                "cu" => cu = Some(e.parse::<f64>()?),
                "cv" => cv = Some(e.parse::<f64>()?),
                "width" => width = Some(e.parse::<usize>()?),
                "height" => height = Some(e.parse::<usize>()?),
                "rot" => rot = Some(e.floats::<9>()?),
                "trans" => trans = Some(e.floats::<3>()?),
                "sonar_h_aperture_deg" => h_ap = Some(e.parse::<f64>()?),
                "sonar_v_aperture_deg" => v_ap = Some(e.parse::<f64>()?),
                "sonar_max_range_m" => range = Some(e.parse::<f64>()?),
                other => {
                    return Err(FormatError::line(
                        e.line,
                        format!("unknown key `{other}` (expected one of {})", CALIB_KEYS.join(", ")),
                    ))
                }
            }
        }
        let geom = |e: GeometryError| FormatError::invalid(e.to_string());
        let intrinsics = CameraIntrinsics::new(
            format::require(fx, "fx")?,
            format::require(fy, "fy")?,
            format::require(cu, "cu")?,
            format::require(cv, "cv")?,
            format::require(width, "width")?,
            format::require(height, "height")?,
        )
        .map_err(geom)?;
        let extrinsics =
            RigidTransform::from_rows(format::require(rot, "rot")?, format::require(trans, "trans")?)
                .map_err(geom)?;
        let sonar = SonarAperture::from_degrees(
            format::require(h_ap, "sonar_h_aperture_deg")?,
            format::require(v_ap, "sonar_v_aperture_deg")?,
            format::require(range, "sonar_max_range_m")?,
        )
        .map_err(geom)?;
        Ok(Self {
            intrinsics,
            extrinsics,
            sonar,
        })
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        Self::parse(&format::read_text(path)?).map_err(|e| e.in_file(path))
    }
}

impl fmt::Display for Calibration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = &self.intrinsics;
        writeln!(f, "fx={}", k.fx)?;
        writeln!(f, "fy={}", k.fy)?;
        writeln!(f, "cu={}", k.cu)?;
        writeln!(f, "cv={}", k.cv)?;
        writeln!(f, "width={}", k.width)?;
        writeln!(f, "height={}", k.height)?;
        writeln!(f, "rot={}", join(&self.extrinsics.rotation_rows()))?;
        writeln!(f, "trans={}", join(self.extrinsics.translation.as_slice()))?;
        writeln!(f, "sonar_h_aperture_deg={}", format::degrees(self.sonar.horizontal))?;
        writeln!(f, "sonar_v_aperture_deg={}", format::degrees(self.sonar.vertical))?;
        writeln!(f, "sonar_max_range_m={}", self.sonar.max_range)
    }
}

pub(crate) fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}
