//! Sonar/camera fusion: beam arcs, region–cluster matching and elevation
//! recovery by column-wise back-projection.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::{fmt, time::Instant};

use crate::geometry::{
    back_project, project_to_pixel, spherical_to_cartesian, Calibration, Pixel, Point3, RigidTransform,
    SphericalPoint,
};
use crate::raster::CameraImage;
use crate::segment::{segment, RegionMap, SegmentError, SegmentParams};
use crate::sonar::{
    dbscan_cluster, nearest_return_per_bearing, soca_cfar, CfarParams, ClusterSet, DbscanParams, PolarReturn,
    SonarError, SonarFrame,
};

/// Upper bound on elevation samples per arc.
pub const DEFAULT_ARC_SAMPLE_CAP: usize = 256;

/// Elevation probes used to estimate an arc's vertical pixel extent.
const ARC_PROBES: usize = 17;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Sonar(#[from] SonarError),
    #[error("image is {got_w}x{got_h} but the calibration expects {want_w}x{want_h}")]
    ImageSize {
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("sonar frame apertures do not match the calibration")]
    ApertureMismatch,
    #[error("{clouds} clouds but {poses} poses")]
    LengthMismatch { clouds: usize, poses: usize },
    #[error("invalid fusion parameter: {0}")]
    InvalidParams(String),
}

/// One elevation hypothesis of a sonar return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcSample {
    pub phi: f64,
    pub point_sonar: Point3,
    pub pixel: Pixel,
    /// Camera-frame depth.
    pub z_c: f64,
}

/// All in-view elevation hypotheses of one return, ordered by elevation.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamArc {
    pub source: PolarReturn,
    pub samples: Vec<ArcSample>,
}

fn arc_sample(ret: &PolarReturn, phi: f64, calib: &Calibration) -> Option<ArcSample> {
    let k = &calib.intrinsics;
    let point_sonar = spherical_to_cartesian(&SphericalPoint::new(ret.r, ret.theta, phi));
    let pc = calib.extrinsics.apply(&point_sonar);
    let pixel = project_to_pixel(&pc, k).ok()?;
    pixel.cell(k.width, k.height)?;
    Some(ArcSample {
        phi,
        point_sonar,
        pixel,
        z_c: pc.z,
    })
}

/// Sweep a return over `n_samples` uniform elevations, dropping samples that
/// are behind the camera or outside the image.
pub fn project_beam_arc(ret: &PolarReturn, calib: &Calibration, n_samples: usize) -> BeamArc {
    let n = n_samples.max(2);
    let (lo, hi) = (calib.sonar.phi_min(), calib.sonar.phi_max());
    let samples = (0..n)
        .filter_map(|i| arc_sample(ret, lo + (hi - lo) * i as f64 / (n - 1) as f64, calib))
        .collect();
    BeamArc {
        source: *ret,
        samples,
    }
}

/// Sample count keeping adjacent samples within about one pixel vertically,
/// clamped to `[2, cap]`.
pub fn adaptive_sample_count(ret: &PolarReturn, calib: &Calibration, cap: usize) -> usize {
    let (lo, hi) = (calib.sonar.phi_min(), calib.sonar.phi_max());
    let k = &calib.intrinsics;
    let mut prev: Option<f64> = None;
    let mut span = 0.0;
    for i in 0..ARC_PROBES {
        let phi = lo + (hi - lo) * i as f64 / (ARC_PROBES - 1) as f64;
        let p = calib
            .extrinsics
            .apply(&spherical_to_cartesian(&SphericalPoint::new(ret.r, ret.theta, phi)));
        let Ok(px) = project_to_pixel(&p, k) else {
            prev = None;
            continue;
        };
        if let Some(v) = prev {
            span += (px.v - v).abs();
        }
        prev = Some(px.v);
    }
    (span.ceil() as usize + 1).clamp(2, cap.max(2))
}

/// Arcs of every return of every cluster, using adaptive sampling.
pub fn project_cluster_arcs(clusters: &ClusterSet, calib: &Calibration, cap: usize) -> Vec<Vec<BeamArc>> {
    clusters
        .clusters
        .iter()
        .map(|c| {
            c.iter()
                .map(|r| project_beam_arc(r, calib, adaptive_sample_count(r, calib, cap)))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub region_label: u32,
    pub cluster_index: usize,
    /// Arc samples of the cluster whose pixel carries the region label.
    pub overlap_pixels: usize,
    /// Mean range of the cluster's returns with at least one sample in the region.
    pub cluster_mean_range: f64,
}

/// Match every region to the overlapping cluster of smallest mean range.
///
/// `arcs[c]` holds the arcs of cluster `c`. Ties go to the lower cluster
/// index. Matches are ordered by region label.
pub fn match_regions_to_clusters(regions: &RegionMap, arcs: &[Vec<BeamArc>]) -> Vec<Match> {
    #[derive(Default)]
    struct Acc {
        samples: usize,
        returns: usize,
        range_sum: f64,
    }

    let mut acc: BTreeMap<(u32, usize), Acc> = BTreeMap::new();
    let mut hits: BTreeMap<u32, usize> = BTreeMap::new();
    for (c, cluster_arcs) in arcs.iter().enumerate() {
        for arc in cluster_arcs {
            hits.clear();
            for s in &arc.samples {
                let Some((u, v)) = s.pixel.cell(regions.width(), regions.height()) else {
                    continue;
                };
                let label = regions.label(u, v);
                if label != 0 {
                    *hits.entry(label).or_default() += 1;
                }
            }
            for (&label, &n) in &hits {
                let a = acc.entry((label, c)).or_default();
                a.samples += n;
                a.returns += 1;
                a.range_sum += arc.source.r;
            }
        }
    }

    let mut best: BTreeMap<u32, Match> = BTreeMap::new();
    for ((label, c), a) in acc {
        let m = Match {
            region_label: label,
            cluster_index: c,
            overlap_pixels: a.samples,
            cluster_mean_range: a.range_sum / a.returns as f64,
        };
        // clusters arrive in increasing index per label, so strict < keeps ties low
        best.entry(label)
            .and_modify(|cur| {
                if m.cluster_mean_range < cur.cluster_mean_range {
                    *cur = m;
                }
            })
            .or_insert(m);
    }
    best.into_values().collect()
}

/// How region columns without any sonar sample are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnFill {
    /// Emit nothing for those columns.
    #[default]
    Skip,
    /// Borrow the depth of the nearest sampled column (lower column on ties).
    Nearest,
}

impl fmt::Display for ColumnFill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnFill::Skip => "skip",
            ColumnFill::Nearest => "nearest",
        })
    }
}

impl FromStr for ColumnFill {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "skip" => Ok(ColumnFill::Skip),
            "nearest" => Ok(ColumnFill::Nearest),
            _ => Err(format!("unknown column fill `{s}` (expected skip or nearest)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub region_label: u32,
    pub column: u32,
    /// Depth shared by every point of the column.
    pub z_mean: f64,
}

/// Camera-frame points with their source region and column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FusedCloud {
    pub points: Vec<Point3>,
    pub provenance: Vec<Provenance>,
}

impl FusedCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn extend(&mut self, other: FusedCloud) {
        self.points.extend(other.points);
        self.provenance.extend(other.provenance);
    }
}

/// Pixels of every region grouped by column, rows ascending.
pub struct RegionColumns {
    /// `columns[l - 1]` maps column → rows of label `l`.
    columns: Vec<BTreeMap<u32, Vec<u32>>>,
}

impl RegionColumns {
    pub fn new(regions: &RegionMap) -> Self {
        let mut columns = vec![BTreeMap::new(); regions.num_regions()];
        for y in 0..regions.height() {
            for x in 0..regions.width() {
                let l = regions.label(x, y);
                if l != 0 {
                    columns[l as usize - 1]
                        .entry(x as u32)
                        .or_insert_with(Vec::new)
                        .push(y as u32);
                }
            }
        }
        Self { columns }
    }

    pub fn of(&self, label: u32) -> &BTreeMap<u32, Vec<u32>> {
        &self.columns[label as usize - 1]
    }
}

/// Give every region pixel (every `row_stride`-th per column) the mean
/// camera depth of the matched cluster's samples in that column, and
/// back-project it.
pub fn expand_and_backproject(
    m: &Match,
    regions: &RegionMap,
    columns: &RegionColumns,
    arcs: &[BeamArc],
    calib: &Calibration,
    row_stride: usize,
    fill: ColumnFill,
) -> FusedCloud {
    let stride = row_stride.max(1);
    let k = &calib.intrinsics;
    let mut depth: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for s in arcs.iter().flat_map(|a| &a.samples) {
        if let Some((u, v)) = s.pixel.cell(regions.width(), regions.height()) {
            if regions.label(u, v) == m.region_label {
                let e = depth.entry(u as u32).or_insert((0.0, 0));
                e.0 += s.z_c;
                e.1 += 1;
            }
        }
    }
    let z_mean: BTreeMap<u32, f64> = depth.into_iter().map(|(u, (sum, n))| (u, sum / n as f64)).collect();

    let mut cloud = FusedCloud::default();
    if z_mean.is_empty() {
        return cloud;
    }
    for (&u, rows) in columns.of(m.region_label) {
        let z = match (z_mean.get(&u), fill) {
            (Some(&z), _) => z,
            (None, ColumnFill::Skip) => continue,
            (None, ColumnFill::Nearest) => nearest_column_depth(&z_mean, u),
        };
        for &v in rows.iter().step_by(stride) {
            let p = back_project(&Pixel::new(u as f64, v as f64), z, k).expect("sampled depths are positive");
            cloud.points.push(p);
            cloud.provenance.push(Provenance {
                region_label: m.region_label,
                column: u,
                z_mean: z,
            });
        }
    }
    cloud
}

fn nearest_column_depth(z_mean: &BTreeMap<u32, f64>, u: u32) -> f64 {
    let below = z_mean.range(..u).next_back();
    let above = z_mean.range(u..).next();
    match (below, above) {
        (Some((&a, &za)), Some((&b, &zb))) => {
            if u - a <= b - u {
                za
            } else {
                zb
            }
        }
        (Some((_, &z)), None) | (None, Some((_, &z))) => z,
        (None, None) => unreachable!("caller checks for sampled columns"),
    }
}

/// Every tunable of the per-frame pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    pub segment: SegmentParams,
    pub cfar: CfarParams,
    pub dbscan: DbscanParams,
    pub arc_sample_cap: usize,
    pub row_stride: usize,
    pub column_fill: ColumnFill,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            segment: SegmentParams::default(),
            cfar: CfarParams::default(),
            dbscan: DbscanParams::default(),
            arc_sample_cap: DEFAULT_ARC_SAMPLE_CAP,
            row_stride: 1,
            column_fill: ColumnFill::Skip,
        }
    }
}

/// Intermediate products and the fused cloud of one frame pair.
#[derive(Debug, Clone)]
pub struct FrameReconstruction {
    pub regions: RegionMap,
    pub returns: Vec<PolarReturn>,
    pub clusters: ClusterSet,
    pub matches: Vec<Match>,
    pub cloud: FusedCloud,
    pub timings: StageTimings,
}

/// Wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    pub segment: f64,
    pub sonar: f64,
    pub fusion: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.segment + self.sonar + self.fusion
    }
}

fn same_aperture(frame: &SonarFrame, calib: &Calibration) -> bool {
    let (a, b) = (frame.aperture(), &calib.sonar);
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0);
    close(a.horizontal, b.horizontal) && close(a.vertical, b.vertical) && close(a.max_range, b.max_range)
}

/// Run the whole pipeline on one paired sonar frame and camera image.
pub fn reconstruct_frame(
    sonar: &SonarFrame,
    image: &CameraImage,
    calib: &Calibration,
    params: &FusionParams,
) -> Result<FrameReconstruction, FusionError> {
    let k = &calib.intrinsics;
    if (image.width(), image.height()) != (k.width, k.height) {
        return Err(FusionError::ImageSize {
            want_w: k.width,
            want_h: k.height,
            got_w: image.width(),
            got_h: image.height(),
        });
    }
    if !same_aperture(sonar, calib) {
        return Err(FusionError::ApertureMismatch);
    }
    if params.row_stride == 0 {
        return Err(FusionError::InvalidParams("row_stride must be at least 1".into()));
    }
    if params.arc_sample_cap < 2 {
        return Err(FusionError::InvalidParams("arc sample cap must be at least 2".into()));
    }

    let t0 = Instant::now();
    let regions = segment(image, &params.segment)?;
    let t1 = Instant::now();
    let mask = soca_cfar(sonar, &params.cfar)?;
    let returns = nearest_return_per_bearing(sonar, &mask)?;
    let clusters = dbscan_cluster(&returns, &params.dbscan)?;
    let t2 = Instant::now();

    let arcs = project_cluster_arcs(&clusters, calib, params.arc_sample_cap);
    let matches = match_regions_to_clusters(&regions, &arcs);
    let columns = RegionColumns::new(&regions);
    let mut cloud = FusedCloud::default();
    for m in &matches {
        cloud.extend(expand_and_backproject(
            m,
            &regions,
            &columns,
            &arcs[m.cluster_index],
            calib,
            params.row_stride,
            params.column_fill,
        ));
    }
    let t3 = Instant::now();

    Ok(FrameReconstruction {
        regions,
        returns,
        clusters,
        matches,
        cloud,
        timings: StageTimings {
            segment: (t1 - t0).as_secs_f64(),
            sonar: (t2 - t1).as_secs_f64(),
            fusion: (t3 - t2).as_secs_f64(),
        },
    })
}

/// Zero-elevation placement of nearest returns in the camera frame: the
/// sonar-only reconstruction without optical elevation.
pub fn flat_returns_to_camera(returns: &[PolarReturn], calib: &Calibration) -> Vec<Point3> {
    returns
        .iter()
        .map(|r| {
            calib
                .extrinsics
                .apply(&spherical_to_cartesian(&SphericalPoint::new(r.r, r.theta, 0.0)))
        })
        .collect()
}

/// Map every cloud into the world by its `world_from_camera` pose and concatenate.
pub fn aggregate_clouds(clouds: &[FusedCloud], poses: &[RigidTransform]) -> Result<Vec<Point3>, FusionError> {
    if clouds.len() != poses.len() {
        return Err(FusionError::LengthMismatch {
            clouds: clouds.len(),
            poses: poses.len(),
        });
    }
    Ok(clouds
        .iter()
        .zip(poses)
        .flat_map(|(c, pose)| c.points.iter().map(move |p| pose.apply(p)))
        .collect())
}
