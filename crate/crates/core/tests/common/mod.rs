#![allow(dead_code)]

use nalgebra::Vector3;
use optifuse::fusion::{reconstruct_frame, FrameReconstruction, FusionParams};
use optifuse::geometry::{Calibration, Point3, RigidTransform};
use optifuse::simulate::{
    default_calibration, forward_camera_pose, pier_scene, render_pair, CameraRendering, PairParams, SceneModel,
};
use optifuse::sonar::SonarFrame;

pub struct Fixture {
    pub scene: SceneModel,
    pub calib: Calibration,
    pub pose: RigidTransform,
    pub sonar: SonarFrame,
    pub camera: CameraRendering,
}

/// Noise-free pier rendered from the origin.
pub fn pier() -> Fixture {
    pier_from(forward_camera_pose(Vector3::zeros()))
}

pub fn pier_from(pose: RigidTransform) -> Fixture {
    pier_with_noise(pose, 0.0, 1)
}

pub fn pier_with_noise(pose: RigidTransform, amplitude: f64, seed: u64) -> Fixture {
    let scene = pier_scene();
    let calib = default_calibration();
    let mut params = PairParams::default();
    params.noise.amplitude = amplitude;
    params.noise.seed = seed;
    let (sonar, camera) = render_pair(&scene, &pose, &calib, &params);
    Fixture {
        scene,
        calib,
        pose,
        sonar,
        camera,
    }
}

impl Fixture {
    pub fn reconstruct(&self, image: &optifuse::CameraImage) -> FrameReconstruction {
        reconstruct_frame(&self.sonar, image, &self.calib, &FusionParams::default()).unwrap()
    }

    pub fn to_world(&self, pts: &[Point3]) -> Vec<Point3> {
        pts.iter().map(|p| self.pose.apply(p)).collect()
    }
}
