//! Opti-acoustic scene reconstruction: fuse forward-looking imaging sonar
//! returns with monocular camera segmentation to recover 3D points.

pub mod cloud;
pub mod config;
pub mod format;
pub mod fusion;
pub mod geometry;
pub mod metrics;
pub mod raster;
pub mod segment;
pub mod simulate;
pub mod sonar;
pub mod turbidity;

pub use config::PipelineConfig;
pub use format::FormatError;
pub use fusion::{reconstruct_frame, FusedCloud, FusionParams};
pub use geometry::{Calibration, CameraIntrinsics, Extrinsics, Pixel, Point3, RigidTransform, SonarAperture};
pub use raster::CameraImage;
pub use segment::RegionMap;
pub use simulate::SceneModel;
pub use sonar::{ClusterSet, PolarReturn, SonarFrame};
