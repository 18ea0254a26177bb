mod common;

use std::collections::BTreeMap;

use nalgebra::Vector3;
use optifuse::fusion::{
    aggregate_clouds, match_regions_to_clusters, project_cluster_arcs, reconstruct_frame, ColumnFill, FusionParams,
    DEFAULT_ARC_SAMPLE_CAP,
};
use optifuse::geometry::project_to_pixel;
use optifuse::metrics::absolute_error;
use optifuse::simulate::forward_camera_pose;
use optifuse::turbidity::{apply_turbidity, AttenuationMode, TurbidityParams, WaterType};

#[test]
fn pier_reconstruction_is_accurate() {
    let fx = common::pier();
    let rec = fx.reconstruct(&fx.camera.image);
    assert!(rec.matches.len() >= 4);
    let bl = fx.sonar.bin_length();
    let err = absolute_error(&fx.to_world(&rec.cloud.points), &fx.scene).unwrap();
    assert!(err.median <= bl, "median {} > {bl}", err.median);

    let turbid = apply_turbidity(&fx.camera.image, &TurbidityParams::new(WaterType::C9, 1.0, AttenuationMode::Absolute)).unwrap();
    let rec = fx.reconstruct(&turbid);
    assert!(!rec.cloud.is_empty());
    let err = absolute_error(&fx.to_world(&rec.cloud.points), &fx.scene).unwrap();
    assert!(err.median <= 2.0 * bl);
}

#[test]
fn default_noise_does_not_displace_returns() {
    for seed in [1, 7, 42] {
        let fx = common::pier_with_noise(forward_camera_pose(Vector3::zeros()), 0.05, seed);
        let rec = fx.reconstruct(&fx.camera.image);
        assert_eq!(rec.clusters.len(), 4, "seed {seed}");
        let err = absolute_error(&fx.to_world(&rec.cloud.points), &fx.scene).unwrap();
        assert!(err.median <= fx.sonar.bin_length(), "seed {seed}: median {}", err.median);
    }
}

#[test]
fn fused_points_respect_their_regions_and_columns() {
    let fx = common::pier();
    let rec = fx.reconstruct(&fx.camera.image);
    let k = &fx.calib.intrinsics;
    for (p, prov) in rec.cloud.points.iter().zip(&rec.cloud.provenance) {
        let (u, v) = project_to_pixel(p, k).unwrap().cell(k.width, k.height).unwrap();
        assert_eq!(rec.regions.label(u, v), prov.region_label);
        assert_eq!(u as u32, prov.column);
        assert_eq!(p.z, prov.z_mean);
        assert!(prov.z_mean > 0.0);
    }
}

#[test]
fn matches_pick_the_closest_overlapping_cluster() {
    let fx = common::pier();
    let rec = fx.reconstruct(&fx.camera.image);
    let arcs = project_cluster_arcs(&rec.clusters, &fx.calib, DEFAULT_ARC_SAMPLE_CAP);
    assert_eq!(match_regions_to_clusters(&rec.regions, &arcs), rec.matches);
    // independent recount of every (region, cluster) overlap
    let mut means: BTreeMap<(u32, usize), (f64, usize)> = BTreeMap::new();
    for (c, cluster) in arcs.iter().enumerate() {
        for arc in cluster {
            let mut labels: Vec<u32> = arc
                .samples
                .iter()
                .filter_map(|s| s.pixel.cell(640, 480))
                .map(|(u, v)| rec.regions.label(u, v))
                .filter(|&l| l != 0)
                .collect();
            labels.sort();
            labels.dedup();
            for l in labels {
                let e = means.entry((l, c)).or_insert((0.0, 0));
                e.0 += arc.source.r;
                e.1 += 1;
            }
        }
    }
    for m in &rec.matches {
        assert!(m.overlap_pixels >= 1);
        for (&(l, _), &(sum, n)) in &means {
            if l == m.region_label {
                assert!(sum / n as f64 >= m.cluster_mean_range - 1e-12);
            }
        }
    }
}

#[test]
fn nearest_fill_only_adds_points() {
    let fx = common::pier();
    let skip = fx.reconstruct(&fx.camera.image);
    let params = FusionParams { column_fill: ColumnFill::Nearest, ..FusionParams::default() };
    let fill = reconstruct_frame(&fx.sonar, &fx.camera.image, &fx.calib, &params).unwrap();
    assert!(fill.cloud.len() >= skip.cloud.len());
    let strided = FusionParams { row_stride: 4, ..FusionParams::default() };
    let thin = reconstruct_frame(&fx.sonar, &fx.camera.image, &fx.calib, &strided).unwrap();
    assert!(thin.cloud.len() * 4 >= skip.cloud.len() && thin.cloud.len() < skip.cloud.len());
}

#[test]
fn reconstruction_is_deterministic() {
    let fx = common::pier();
    let a = fx.reconstruct(&fx.camera.image);
    let b = fx.reconstruct(&fx.camera.image);
    assert_eq!(a.cloud, b.cloud);
    assert_eq!(a.matches, b.matches);
}

#[test]
fn two_pose_aggregation_keeps_error() {
    let a = common::pier();
    let b = common::pier_from(forward_camera_pose(Vector3::new(0.1, -0.1, 0.05)));
    let ra = a.reconstruct(&a.camera.image);
    let rb = b.reconstruct(&b.camera.image);
    let ea = absolute_error(&a.to_world(&ra.cloud.points), &a.scene).unwrap().median;
    let eb = absolute_error(&b.to_world(&rb.cloud.points), &b.scene).unwrap().median;
    let world = aggregate_clouds(&[ra.cloud.clone(), rb.cloud.clone()], &[a.pose, b.pose]).unwrap();
    assert_eq!(world.len(), ra.cloud.len() + rb.cloud.len());
    let agg = absolute_error(&world, &a.scene).unwrap().median;
    let per_frame = 0.5 * (ea + eb);
    assert!((agg - per_frame).abs() <= 0.1 * per_frame, "{agg} vs {ea}, {eb}");
}
