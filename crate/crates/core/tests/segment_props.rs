mod common;

use optifuse::segment::{adaptive_threshold, filter_regions, gaussian_blur, segment, watershed_segment, SegmentParams};
use optifuse::turbidity::{apply_turbidity, AttenuationMode, TurbidityParams, WaterType};
use optifuse::CameraImage;
use proptest::prelude::*;

fn image(w: usize, h: usize) -> impl Strategy<Value = CameraImage> {
    prop::collection::vec(0.0..=1.0f64, w * h).prop_map(move |d| CameraImage::new(w, h, 1, d).unwrap())
}

fn reflect(i: isize, n: usize) -> usize {
    // mirror including the edge sample: -1 -> 0, n -> n - 1
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n as isize {
            i = 2 * n as isize - i - 1;
        } else {
            return i as usize;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blur_preserves_total_intensity(img in (3usize..40, 3usize..40).prop_flat_map(|(w, h)| image(w, h)), sigma in 0.3..4.0f64) {
        let out = gaussian_blur(&img, sigma).unwrap();
        let before: f64 = img.data().iter().sum();
        let after: f64 = out.data().iter().sum();
        prop_assert!((before - after).abs() < 1e-6);
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn threshold_matches_brute_force(img in image(23, 17), half in 1usize..8, offset in -0.1..0.1f64) {
        let block = 2 * half + 1;
        let out = adaptive_threshold(&img, block, offset).unwrap();
        for y in 0..17 {
            for x in 0..23 {
                let mut sum = 0.0;
                for dy in -(half as isize)..=half as isize {
                    for dx in -(half as isize)..=half as isize {
                        sum += img.get(reflect(x as isize + dx, 23), reflect(y as isize + dy, 17), 0);
                    }
                }
                let mean = sum / (block * block) as f64;
                let want = if img.get(x, y, 0) > mean - offset { 1.0 } else { 0.0 };
                prop_assert_eq!(out.get(x, y, 0), want);
            }
        }
    }

    #[test]
    fn surviving_regions_meet_threshold(
        cells in prop::collection::vec(any::<bool>(), 8 * 6),
        min in 0usize..400,
    ) {
        // blocky random binaries: 8x6 cells of 8x8 pixels
        let bin = CameraImage::from_fn(64, 48, 1, |x, y, _| if cells[(y / 8) * 8 + x / 8] { 1.0 } else { 0.0 }).unwrap();
        let raw = watershed_segment(&bin, 0.5, 1).unwrap();
        let rm = filter_regions(&raw, min);
        prop_assert!(rm.region_sizes().iter().all(|&s| s >= min));
        // labels stay within the dilation band around the foreground
        let fg = |x: isize, y: isize| (0..64).contains(&x) && (0..48).contains(&y) && bin.get(x as usize, y as usize, 0) == 1.0;
        for y in 0..48isize {
            for x in 0..64isize {
                if rm.label(x as usize, y as usize) != 0 {
                    prop_assert!((-1..=1).any(|dy| (-1..=1).any(|dx| fg(x + dx, y + dy))));
                }
            }
        }
        prop_assert_eq!(filter_regions(&raw, 0), raw);
    }
}

fn coverage(rm: &optifuse::RegionMap, mask: &[bool]) -> f64 {
    let total = mask.iter().filter(|&&m| m).count();
    let best = (1..=rm.num_regions() as u32)
        .map(|l| mask.iter().zip(rm.labels()).filter(|(&m, &x)| m && x == l).count())
        .max()
        .unwrap_or(0);
    best as f64 / total as f64
}

#[test]
fn pier_pilings_are_segmented() {
    let fx = common::pier();
    let params = SegmentParams::default();
    let clear = segment(&fx.camera.image, &params).unwrap();
    let turbid_img = apply_turbidity(
        &fx.camera.image,
        &TurbidityParams::new(WaterType::C9, 1.0, AttenuationMode::Absolute),
    )
    .unwrap();
    let turbid = segment(&turbid_img, &params).unwrap();
    for i in 0..4 {
        let mask = fx.camera.silhouettes.primitive_mask(i);
        assert!(coverage(&clear, &mask) >= 0.8, "piling {i}: {}", coverage(&clear, &mask));
        assert!(coverage(&turbid, &mask) >= 0.6, "turbid piling {i}: {}", coverage(&turbid, &mask));
    }
    assert!(clear.region_sizes().iter().all(|&s| s >= params.min_region_px));
    assert_eq!(segment(&fx.camera.image, &params).unwrap(), clear);
}

#[test]
fn uniform_image_has_no_regions() {
    let img = CameraImage::filled(64, 48, 3, 0.5);
    assert_eq!(segment(&img, &SegmentParams::default()).unwrap().num_regions(), 0);
}
