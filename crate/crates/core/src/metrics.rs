//! Voxel coverage and absolute error against a scene model.

use std::collections::HashSet;

use crate::geometry::Point3;
use crate::simulate::{distance_to_scene, SceneModel};

/// Default coverage voxel edge, meters.
pub const DEFAULT_VOXEL_RESOLUTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("cannot evaluate an empty cloud")]
    EmptyCloud,
    #[error("voxel resolution must be positive, got {0}")]
    InvalidResolution(f64),
}

/// Occupied cells of a uniform grid; a point belongs to `floor(p / resolution)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    resolution: f64,
    occupied: HashSet<[i64; 3]>,
}

impl VoxelGrid {
    pub fn new(resolution: f64) -> Result<Self, MetricsError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MetricsError::InvalidResolution(resolution));
        }
        Ok(Self {
            resolution,
            occupied: HashSet::new(),
        })
    }

    pub fn insert(&mut self, p: &Point3) {
        let cell = p.coords.map(|c| (c / self.resolution).floor() as i64);
        self.occupied.insert([cell.x, cell.y, cell.z]);
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }
}

/// Number of grid cells holding at least one point.
pub fn voxel_count(cloud: &[Point3], resolution: f64) -> Result<usize, MetricsError> {
    let mut grid = VoxelGrid::new(resolution)?;
    for p in cloud {
        grid.insert(p);
    }
    Ok(grid.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Per-point distance to the scene, in cloud order.
    pub distances: Vec<f64>,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
}

/// Percentile with linear interpolation between closest ranks of `sorted`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl ErrorReport {
    pub fn from_distances(distances: Vec<f64>) -> Result<Self, MetricsError> {
        if distances.is_empty() {
            return Err(MetricsError::EmptyCloud);
        }
        let mut sorted = distances.clone();
        sorted.sort_by(f64::total_cmp);
        let p50 = percentile(&sorted, 50.0);
        Ok(Self {
            median: p50,
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            max: sorted[sorted.len() - 1],
            p50,
            p90: percentile(&sorted, 90.0),
            p95: percentile(&sorted, 95.0),
            distances,
        })
    }
}

/// Distance of every point to its nearest scene surface.
pub fn absolute_error(cloud: &[Point3], scene: &SceneModel) -> Result<ErrorReport, MetricsError> {
    ErrorReport::from_distances(cloud.iter().map(|p| distance_to_scene(scene, p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{pier_scene, ScenePrimitive};
    use nalgebra::Vector3;

    #[test]
    fn voxel_examples() {
        assert_eq!(voxel_count(&[], 0.01).unwrap(), 0);
        assert_eq!(voxel_count(&vec![Point3::new(0.3, -0.2, 1.0); 1000], 0.01).unwrap(), 1);
        let a = Point3::origin();
        assert_eq!(voxel_count(&[a, Point3::new(0.004, 0.0, 0.0)], 0.01).unwrap(), 1);
        assert_eq!(voxel_count(&[a, Point3::new(0.014, 0.0, 0.0)], 0.01).unwrap(), 2);
        // floor, not truncation, below zero
        assert_eq!(voxel_count(&[a, Point3::new(-0.004, 0.0, 0.0)], 0.01).unwrap(), 2);
        assert!(voxel_count(&[a], 0.0).is_err());
    }

    #[test]
    fn percentiles_interpolate() {
        let r = ErrorReport::from_distances(vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(r.median, 2.5);
        assert_eq!(r.mean, 2.5);
        assert_eq!(r.max, 4.0);
        assert!((r.p90 - 3.7).abs() < 1e-12);
        assert!((r.p95 - 3.85).abs() < 1e-12);
        assert_eq!(r.distances, vec![4.0, 1.0, 3.0, 2.0]);
        assert_eq!(ErrorReport::from_distances(vec![]), Err(MetricsError::EmptyCloud));
    }

    #[test]
    fn axis_point_error_is_radius() {
        let scene = SceneModel::new(vec![ScenePrimitive::cylinder(
            Point3::new(2.0, 0.0, 0.0),
            Vector3::z(),
            0.1,
            1.0,
            0.5,
        )])
        .unwrap();
        let r = absolute_error(&[Point3::new(2.0, 0.0, 0.2)], &scene).unwrap();
        assert!((r.median - 0.1).abs() < 1e-12);
    }

    #[test]
    fn surface_samples_have_zero_error() {
        let pts: Vec<Point3> = (0..360)
            .map(|i| {
                let a = (i as f64).to_radians();
                Point3::new(1.5 + 0.1 * a.cos(), 0.25 + 0.1 * a.sin(), (i as f64 / 360.0) - 0.5)
            })
            .collect();
        let r = absolute_error(&pts, &pier_scene()).unwrap();
        assert!(r.median.abs() < 1e-9 && r.max < 1e-9);
        assert_eq!(absolute_error(&[], &pier_scene()), Err(MetricsError::EmptyCloud));
    }
}
