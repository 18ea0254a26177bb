//! Optical segmentation: blur, local thresholding, marker-controlled watershed
//! and region-size filtering.
//!
//! The pipeline is tuned for low-contrast, unevenly lit underwater frames. A
//! local mean threshold keeps every pixel that is not noticeably darker than
//! its neighbourhood, which leaves objects and open background as foreground
//! separated by thin dark bands. The watershed then splits the foreground into
//! regions seeded at the cores of the distance transform.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::path::Path;

use crate::format::FormatError;
use crate::raster::{self, CameraImage};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SegmentError {
    #[error("gaussian sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("threshold block must be odd, got {0}")]
    EvenBlock(usize),
    #[error("threshold block must be at least 3, got {0}")]
    BlockTooSmall(usize),
    #[error("expected a grayscale image, got {0} channels")]
    NotGrayscale(usize),
    #[error("marker fraction must lie in [0, 1), got {0}")]
    InvalidMarkerFraction(f64),
}

/// Tunables of the optical segmentation stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    /// Gaussian blur standard deviation, pixels.
    pub sigma: f64,
    /// Side of the square adaptive-threshold window, pixels (odd).
    pub block: usize,
    /// Intensity subtracted from the local mean.
    pub offset: f64,
    /// Watershed markers keep pixels deeper than this fraction of their
    /// component's maximum distance.
    pub marker_frac: f64,
    /// Background marker excludes this many pixels around the foreground.
    pub dilate_px: usize,
    /// Minimum region size `T`, pixels.
    pub min_region_px: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            sigma: 2.0,
            block: 31,
            offset: 0.02,
            marker_frac: 0.5,
            dilate_px: 3,
            min_region_px: 334,
        }
    }
}

/// Per-pixel region labels, 0 for background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    /// `sizes[l - 1]` is the pixel count of label `l`.
    sizes: Vec<usize>,
}

impl RegionMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![0; width * height],
            sizes: Vec::new(),
        }
    }

    /// Build from raw labels; labels must be dense `1..=k`.
    pub fn from_labels(width: usize, height: usize, labels: Vec<u32>) -> Self {
        assert_eq!(labels.len(), width * height);
        let k = labels.iter().copied().max().unwrap_or(0) as usize;
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            if l > 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        assert!(sizes.iter().all(|&s| s > 0), "labels must be dense");
        Self {
            width,
            height,
            labels,
            sizes,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_regions(&self) -> usize {
        self.sizes.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn size(&self, label: u32) -> usize {
        if label == 0 {
            0
        } else {
            self.sizes[label as usize - 1]
        }
    }

    pub fn region_sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Debug export: one byte per pixel, labels saturating at 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let bytes: Vec<u8> = self.labels.iter().map(|&l| l.min(255) as u8).collect();
        raster::encode_pnm(self.width, self.height, 1, &bytes)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<(), FormatError> {
        crate::format::write_bytes(path, &self.to_pgm())
    }
}

/// Half-sample symmetric index reflection (`… b a | a b c … z | z y …`).
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Normalized 1D Gaussian taps of radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable Gaussian blur with reflected borders, applied per channel.
pub fn gaussian_blur(img: &CameraImage, sigma: f64) -> Result<CameraImage, SegmentError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(SegmentError::InvalidSigma(sigma));
    }
    let taps = gaussian_kernel(sigma);
    let radius = (taps.len() / 2) as isize;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let src = img.data();

    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (k, &t) in taps.iter().enumerate() {
                    let xx = reflect(x as isize + k as isize - radius, w);
                    acc += t * src[(y * w + xx) * ch + c];
                }
                tmp[(y * w + x) * ch + c] = acc;
            }
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (k, &t) in taps.iter().enumerate() {
                    let yy = reflect(y as isize + k as isize - radius, h);
                    acc += t * tmp[(yy * w + x) * ch + c];
                }
                out[(y * w + x) * ch + c] = acc;
            }
        }
    }
    Ok(CameraImage::from_raw_clamped(w, h, ch, out))
}

/// Mean over a `block × block` window with reflected borders.
fn box_mean(data: &[f64], w: usize, h: usize, block: usize) -> Vec<f64> {
    let r = (block / 2) as isize;
    let mut prefix = vec![0.0; w.max(h) + block + 1];

    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        prefix[0] = 0.0;
        for i in 0..w + block - 1 {
            let x = reflect(i as isize - r, w);
            prefix[i + 1] = prefix[i] + data[y * w + x];
        }
        for x in 0..w {
            rows[y * w + x] = prefix[x + block] - prefix[x];
        }
    }
    let mut out = vec![0.0; w * h];
    let norm = (block * block) as f64;
    for x in 0..w {
        prefix[0] = 0.0;
        for i in 0..h + block - 1 {
            let y = reflect(i as isize - r, h);
            prefix[i + 1] = prefix[i] + rows[y * w + x];
        }
        for y in 0..h {
            out[y * w + x] = (prefix[y + block] - prefix[y]) / norm;
        }
    }
    out
}

/// Binary image: 1 where `value > local_mean − offset`.
pub fn adaptive_threshold(
    img: &CameraImage,
    block: usize,
    offset: f64,
) -> Result<CameraImage, SegmentError> {
    if img.channels() != 1 {
        return Err(SegmentError::NotGrayscale(img.channels()));
    }
    if block.is_multiple_of(2) {
        return Err(SegmentError::EvenBlock(block));
    }
    if block < 3 {
        return Err(SegmentError::BlockTooSmall(block));
    }
    let (w, h) = (img.width(), img.height());
    let mean = box_mean(img.data(), w, h, block);
    let out = img
        .data()
        .iter()
        .zip(&mean)
        .map(|(&v, &m)| if v > m - offset { 1.0 } else { 0.0 })
        .collect();
    Ok(CameraImage::from_raw_clamped(w, h, 1, out))
}

/// Exact squared Euclidean distance to the nearest background pixel
/// (`f64::INFINITY` when the image has no background).
pub fn squared_distance_transform(fg: &[bool], w: usize, h: usize) -> Vec<f64> {
    let mut d: Vec<f64> = fg.iter().map(|&f| if f { f64::INFINITY } else { 0.0 }).collect();
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for x in 0..w {
        for y in 0..h {
            f[y] = d[y * w + x];
        }
        lower_envelope(&f[..h], &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            d[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&d[y * w..(y + 1) * w]);
        lower_envelope(&f[..w], &mut out[..w], &mut v, &mut z);
        d[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    d
}

/// 1D squared-distance transform by the lower envelope of parabolas.
fn lower_envelope(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        out.fill(f64::INFINITY);
        return;
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let qf = q as f64;
        // z[0] = -inf terminates the loop at k = 0
        loop {
            let p = v[k];
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
            if s <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *o = (qf - p) * (qf - p) + f[v[k]];
    }
}

/// 4-connected components of `mask`, labelled `1..` in raster order.
fn components(mask: &[bool], w: usize, h: usize) -> (Vec<u32>, u32) {
    components_by(w, h, |i| if mask[i] { Some(0) } else { None })
}

/// 4-connected components of pixels sharing the same `key`; `None` is background.
fn components_by(w: usize, h: usize, key: impl Fn(usize) -> Option<u32>) -> (Vec<u32>, u32) {
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if labels[start] != 0 {
            continue;
        }
        let Some(k) = key(start) else { continue };
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            for j in neighbors4(x, y, w, h) {
                if labels[j] == 0 && key(j) == Some(k) {
                    labels[j] = next;
                    stack.push(j);
                }
            }
        }
    }
    (labels, next)
}

fn neighbors4(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let i = y * w + x;
    [
        (y > 0).then(|| i - w),
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y + 1 < h).then(|| i + w),
    ]
    .into_iter()
    .flatten()
}

const UNLABELED: u32 = 0;
const RIDGE: u32 = u32::MAX;

/// Marker-controlled watershed on the inverted distance map of `binary`.
///
/// Foreground markers are the connected cores `{d > marker_frac · d_max}` of
/// each foreground component, with `d_max` taken per component. The
/// background marker is every pixel farther than `dilate_px` (Chebyshev) from
/// the foreground. Ridge pixels and pixels claimed by the background marker
/// end up with label 0. A binary image without any background pixel has no
/// distance structure and yields no regions.
pub fn watershed_segment(
    binary: &CameraImage,
    marker_frac: f64,
    dilate_px: usize,
) -> Result<RegionMap, SegmentError> {
    if binary.channels() != 1 {
        return Err(SegmentError::NotGrayscale(binary.channels()));
    }
    if !(0.0..1.0).contains(&marker_frac) {
        return Err(SegmentError::InvalidMarkerFraction(marker_frac));
    }
    let (w, h) = (binary.width(), binary.height());
    let fg: Vec<bool> = binary.data().iter().map(|&v| v > 0.5).collect();
    if !fg.iter().any(|&f| f) || fg.iter().all(|&f| f) {
        return Ok(RegionMap::empty(w, h));
    }

    let dist = squared_distance_transform(&fg, w, h);
    let (comp, ncomp) = components(&fg, w, h);
    let mut comp_max = vec![0.0f64; ncomp as usize + 1];
    for (i, &c) in comp.iter().enumerate() {
        if c > 0 {
            comp_max[c as usize] = comp_max[c as usize].max(dist[i]);
        }
    }
    let frac_sq = marker_frac * marker_frac;
    let core: Vec<bool> = (0..w * h)
        .map(|i| comp[i] > 0 && dist[i] > frac_sq * comp_max[comp[i] as usize])
        .collect();
    let (mut labels, nmarkers) = components(&core, w, h);
    let bg_label = nmarkers + 1;

    // Background marker: no foreground pixel within the dilation square.
    let near_fg = dilate(&fg, w, h, dilate_px);
    for i in 0..w * h {
        if !near_fg[i] {
            labels[i] = bg_label;
        }
    }

    // Priority flood: deepest pixels first, ties broken by insertion order.
    let mut heap = BinaryHeap::new();
    let mut queued = vec![false; w * h];
    let mut seq = 0u64;
    let level = |i: usize| dist[i] as u64;
    for i in 0..w * h {
        if labels[i] != UNLABELED {
            for j in neighbors4(i % w, i / w, w, h) {
                if labels[j] == UNLABELED && !queued[j] {
                    queued[j] = true;
                    heap.push((level(j), Reverse(seq), j));
                    seq += 1;
                }
            }
        }
    }
    while let Some((_, _, i)) = heap.pop() {
        let (x, y) = (i % w, i / w);
        let mut found = UNLABELED;
        let mut ridge = false;
        for j in neighbors4(x, y, w, h) {
            let l = labels[j];
            if l == UNLABELED || l == RIDGE {
                continue;
            }
            if found == UNLABELED {
                found = l;
            } else if found != l {
                ridge = true;
            }
        }
        if ridge || found == UNLABELED {
            labels[i] = RIDGE;
            continue;
        }
        labels[i] = found;
        for j in neighbors4(x, y, w, h) {
            if labels[j] == UNLABELED && !queued[j] {
                queued[j] = true;
                heap.push((level(j), Reverse(seq), j));
                seq += 1;
            }
        }
    }

    let (relabelled, _) = components_by(w, h, |i| {
        let l = labels[i];
        (l != UNLABELED && l != RIDGE && l != bg_label).then_some(l)
    });
    Ok(RegionMap::from_labels(w, h, relabelled))
}

fn dilate(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    if r == 0 {
        return mask.to_vec();
    }
    let mut horiz = vec![false; w * h];
    for y in 0..h {
        // distance to the most recent foreground pixel on either side
        let row = &mask[y * w..(y + 1) * w];
        let mut last: Option<usize> = None;
        for x in 0..w {
            if row[x] {
                last = Some(x);
            }
            if last.is_some_and(|l| x - l <= r) {
                horiz[y * w + x] = true;
            }
        }
        let mut last: Option<usize> = None;
        for x in (0..w).rev() {
            if row[x] {
                last = Some(x);
            }
            if last.is_some_and(|l| l - x <= r) {
                horiz[y * w + x] = true;
            }
        }
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        let mut last: Option<usize> = None;
        for y in 0..h {
            if horiz[y * w + x] {
                last = Some(y);
            }
            if last.is_some_and(|l| y - l <= r) {
                out[y * w + x] = true;
            }
        }
        let mut last: Option<usize> = None;
        for y in (0..h).rev() {
            if horiz[y * w + x] {
                last = Some(y);
            }
            if last.is_some_and(|l| l - y <= r) {
                out[y * w + x] = true;
            }
        }
    }
    out
}

/// Drop regions smaller than `min_size` and renumber the rest from 1,
/// preserving their relative order.
pub fn filter_regions(rm: &RegionMap, min_size: usize) -> RegionMap {
    let mut remap = vec![0u32; rm.num_regions() + 1];
    let mut next = 0u32;
    for (i, &s) in rm.region_sizes().iter().enumerate() {
        if s >= min_size {
            next += 1;
            remap[i + 1] = next;
        }
    }
    let labels = rm.labels().iter().map(|&l| remap[l as usize]).collect();
    RegionMap::from_labels(rm.width(), rm.height(), labels)
}

/// Full optical stage: blur, grayscale, threshold, watershed, size filter.
pub fn segment(img: &CameraImage, params: &SegmentParams) -> Result<RegionMap, SegmentError> {
    let blurred = gaussian_blur(img, params.sigma)?;
    let gray = blurred.to_gray();
    let binary = adaptive_threshold(&gray, params.block, params.offset)?;
    let regions = watershed_segment(&binary, params.marker_frac, params.dilate_px)?;
    Ok(filter_regions(&regions, params.min_region_px))
}
