//! Polar sonar frames and foreground extraction: SOCA-CFAR detection along
//! range, nearest-return selection per beam, and DBSCAN clustering.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use crate::format::{self, FormatError};
use crate::geometry::SonarAperture;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SonarError {
    #[error("frame needs at least one beam and one bin")]
    EmptyFrame,
    #[error("expected {expected} intensities, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("intensity {index} = {value} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("CFAR window of {window} cells does not fit {bins} range bins")]
    WindowTooLarge { window: usize, bins: usize },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("mask is {got_beams}x{got_bins}, frame is {beams}x{bins}")]
    MaskMismatch {
        beams: usize,
        bins: usize,
        got_beams: usize,
        got_bins: usize,
    },
}

/// One sonar ping as a `[beam][bin]` intensity array.
///
/// Beam `i` of `n` looks along bearing `−h/2 + (i + ½)·h/n`; bin `j` covers
/// ranges `[j, j + 1)·bin_length`.
#[derive(Debug, Clone, PartialEq)]
pub struct SonarFrame {
    aperture: SonarAperture,
    num_beams: usize,
    num_bins: usize,
    bearings: Vec<f64>,
    intensities: Vec<f64>,
}

impl SonarFrame {
    pub fn new(
        aperture: SonarAperture,
        num_beams: usize,
        num_bins: usize,
        intensities: Vec<f64>,
    ) -> Result<Self, SonarError> {
        aperture
            .validate()
            .map_err(|e| SonarError::InvalidParams(e.to_string()))?;
        if num_beams == 0 || num_bins == 0 {
            return Err(SonarError::EmptyFrame);
        }
        let expected = num_beams * num_bins;
        if intensities.len() != expected {
            return Err(SonarError::SizeMismatch {
                expected,
                got: intensities.len(),
            });
        }
        if let Some((index, &value)) = intensities
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
        {
            return Err(SonarError::OutOfRange { index, value });
        }
        let step = aperture.horizontal / num_beams as f64;
        let bearings = (0..num_beams)
            .map(|i| -0.5 * aperture.horizontal + (i as f64 + 0.5) * step)
            .collect();
        Ok(Self {
            aperture,
            num_beams,
            num_bins,
            bearings,
            intensities,
        })
    }

    pub fn zeros(aperture: SonarAperture, num_beams: usize, num_bins: usize) -> Result<Self, SonarError> {
        Self::new(aperture, num_beams, num_bins, vec![0.0; num_beams * num_bins])
    }

    pub fn aperture(&self) -> &SonarAperture {
        &self.aperture
    }

    pub fn num_beams(&self) -> usize {
        self.num_beams
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn bearings(&self) -> &[f64] {
        &self.bearings
    }

    pub fn bin_length(&self) -> f64 {
        self.aperture.max_range / self.num_bins as f64
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn beam(&self, beam: usize) -> &[f64] {
        &self.intensities[beam * self.num_bins..(beam + 1) * self.num_bins]
    }

    pub fn get(&self, beam: usize, bin: usize) -> f64 {
        self.intensities[beam * self.num_bins + bin]
    }

    /// Bin holding range `r`, if inside the frame.
    pub fn bin_of_range(&self, r: f64) -> Option<usize> {
        if r < 0.0 {
            return None;
        }
        let b = (r / self.bin_length()).floor() as usize;
        (b < self.num_bins).then_some(b)
    }

    pub(crate) fn intensities_mut(&mut self) -> &mut [f64] {
        &mut self.intensities
    }
}

/// Smallest-of cell-averaging CFAR parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfarParams {
    /// Training cells on each side of the cell under test.
    pub train: usize,
    /// Guard cells between the cell under test and each training window.
    pub guard: usize,
    /// Threshold scale on the noise estimate.
    pub alpha: f64,
}

impl Default for CfarParams {
    fn default() -> Self {
        Self {
            train: 16,
            guard: 4,
            alpha: 5.0,
        }
    }
}

/// Boolean `[beam][bin]` detection mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionMask {
    num_beams: usize,
    num_bins: usize,
    cells: Vec<bool>,
}

impl DetectionMask {
    pub fn new(num_beams: usize, num_bins: usize, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), num_beams * num_bins);
        Self {
            num_beams,
            num_bins,
            cells,
        }
    }

    pub fn get(&self, beam: usize, bin: usize) -> bool {
        self.cells[beam * self.num_bins + bin]
    }

    pub fn beam(&self, beam: usize) -> &[bool] {
        &self.cells[beam * self.num_bins..(beam + 1) * self.num_bins]
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// SOCA-CFAR along the range axis of every beam.
///
/// Cell `i` is compared against `alpha · min(lead, lag)` where `lead` and
/// `lag` are the means of the `train` cells beyond `guard` cells on either
/// side. Cells whose window would leave the beam are never detections.
pub fn soca_cfar(frame: &SonarFrame, params: &CfarParams) -> Result<DetectionMask, SonarError> {
    if params.train == 0 {
        return Err(SonarError::InvalidParams("CFAR needs at least one training cell".into()));
    }
    if !(params.alpha > 0.0 && params.alpha.is_finite()) {
        return Err(SonarError::InvalidParams(format!(
            "CFAR alpha must be positive, got {}",
            params.alpha
        )));
    }
    let reach = params.train + params.guard;
    let bins = frame.num_bins();
    if bins <= 2 * reach {
        return Err(SonarError::WindowTooLarge {
            window: 2 * reach + 1,
            bins,
        });
    }
    let train = params.train as f64;
    let mut cells = vec![false; frame.num_beams() * bins];
    for (b, out) in cells.chunks_exact_mut(bins).enumerate() {
        let beam = frame.beam(b);
        for i in reach..bins - reach {
            let lead: f64 = beam[i - reach..i - params.guard].iter().sum();
            let lag: f64 = beam[i + params.guard + 1..=i + reach].iter().sum();
            let noise = (lead / train).min(lag / train);
            out[i] = beam[i] > params.alpha * noise;
        }
    }
    Ok(DetectionMask::new(frame.num_beams(), bins, cells))
}

/// A detection in polar form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarReturn {
    pub beam: usize,
    pub r: f64,
    pub theta: f64,
    pub intensity: f64,
}

impl PolarReturn {
    /// Position in the zero-elevation plane.
    pub fn planar(&self) -> [f64; 2] {
        [self.r * self.theta.cos(), self.r * self.theta.sin()]
    }
}

/// Closest detection of every beam, at its bin centre.
pub fn nearest_return_per_bearing(
    frame: &SonarFrame,
    mask: &DetectionMask,
) -> Result<Vec<PolarReturn>, SonarError> {
    if mask.num_beams != frame.num_beams() || mask.num_bins != frame.num_bins() {
        return Err(SonarError::MaskMismatch {
            beams: frame.num_beams(),
            bins: frame.num_bins(),
            got_beams: mask.num_beams,
            got_bins: mask.num_bins,
        });
    }
    let bl = frame.bin_length();
    Ok((0..frame.num_beams())
        .filter_map(|b| {
            let bin = mask.beam(b).iter().position(|&d| d)?;
            Some(PolarReturn {
                beam: b,
                r: (bin as f64 + 0.5) * bl,
                theta: frame.bearings()[b],
                intensity: frame.get(b, bin),
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanParams {
    /// Neighbourhood radius, meters.
    pub eps: f64,
    /// Minimum neighbourhood size (the point itself included) of a core point.
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self {
            eps: 0.10,
            min_pts: 3,
        }
    }
}

/// Clusters in creation order; members and noise keep input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<PolarReturn>>,
    pub noise: Vec<PolarReturn>,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// Cluster index per point, `None` for noise.
///
/// Clusters are numbered in order of their first core point. A border point
/// reachable from several clusters joins the one created first.
pub fn dbscan_labels(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Unvisited,
        Noise,
        Cluster(usize),
    }

    let cell = |p: &[f64; 2]| ((p[0] / eps).floor() as i64, (p[1] / eps).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        let p = points[i];
        let (cx, cy) = cell(&p);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(cx + dx, cy + dy)) {
                    out.extend(bucket.iter().copied().filter(|&j| {
                        let q = points[j];
                        (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) <= eps2
                    }));
                }
            }
        }
        out
    };

    let mut state = vec![State::Unvisited; points.len()];
    let mut next = 0usize;
    let mut queue = VecDeque::new();
    for i in 0..points.len() {
        if state[i] != State::Unvisited {
            continue;
        }
        let nb = neighbors(i);
        if nb.len() < min_pts {
            state[i] = State::Noise;
            continue;
        }
        let c = next;
        next += 1;
        state[i] = State::Cluster(c);
        queue.extend(nb);
        while let Some(j) = queue.pop_front() {
            match state[j] {
                State::Noise => state[j] = State::Cluster(c),
                State::Unvisited => {
                    state[j] = State::Cluster(c);
                    let nbj = neighbors(j);
                    if nbj.len() >= min_pts {
                        queue.extend(nbj);
                    }
                }
                State::Cluster(_) => {}
            }
        }
    }
    state
        .into_iter()
        .map(|s| match s {
            State::Cluster(c) => Some(c),
            _ => None,
        })
        .collect()
}

/// DBSCAN on the returns' zero-elevation Cartesian positions.
pub fn dbscan_cluster(returns: &[PolarReturn], params: &DbscanParams) -> Result<ClusterSet, SonarError> {
    if !(params.eps > 0.0 && params.eps.is_finite()) {
        return Err(SonarError::InvalidParams(format!(
            "DBSCAN eps must be positive, got {}",
            params.eps
        )));
    }
    if params.min_pts == 0 {
        return Err(SonarError::InvalidParams("DBSCAN min_pts must be at least 1".into()));
    }
    let pts: Vec<[f64; 2]> = returns.iter().map(PolarReturn::planar).collect();
    let labels = dbscan_labels(&pts, params.eps, params.min_pts);
    let k = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut out = ClusterSet {
        clusters: vec![Vec::new(); k],
        noise: Vec::new(),
    };
    for (ret, label) in returns.iter().zip(labels) {
        match label {
            Some(c) => out.clusters[c].push(*ret),
            None => out.noise.push(*ret),
        }
    }
    Ok(out)
}

const SONAR_MAGIC: &str = "OPTIFUSE-SONAR 1";

/// Sample encoding after the sonar file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SonarEncoding {
    /// Little-endian IEEE-754 doubles, beam-major.
    F64Le,
    /// Little-endian IEEE-754 singles, beam-major.
    F32Le,
    /// One line per beam, comma-separated.
    Csv,
}

impl SonarEncoding {
    fn name(self) -> &'static str {
        match self {
            SonarEncoding::F64Le => "f64le",
            SonarEncoding::F32Le => "f32le",
            SonarEncoding::Csv => "csv",
        }
    }
}

impl SonarFrame {
    pub fn encode(&self, encoding: SonarEncoding) -> Vec<u8> {
        let mut header = String::new();
        let _ = writeln!(header, "{SONAR_MAGIC}");
        let _ = writeln!(header, "num_beams={}", self.num_beams);
        let _ = writeln!(header, "num_bins={}", self.num_bins);
        let _ = writeln!(header, "h_aperture_deg={}", format::degrees(self.aperture.horizontal));
        let _ = writeln!(header, "v_aperture_deg={}", format::degrees(self.aperture.vertical));
        let _ = writeln!(header, "max_range_m={}", self.aperture.max_range);
        let _ = writeln!(header, "encoding={}", encoding.name());
        let _ = writeln!(header, "end_header");
        let mut out = header.into_bytes();
        match encoding {
            SonarEncoding::F64Le => {
                for v in &self.intensities {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            SonarEncoding::F32Le => {
                for v in &self.intensities {
                    out.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
            SonarEncoding::Csv => {
                for beam in self.intensities.chunks_exact(self.num_bins) {
                    let line: Vec<String> = beam.iter().map(|v| v.to_string()).collect();
                    out.extend_from_slice(line.join(",").as_bytes());
                    out.push(b'\n');
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        const END: &[u8] = b"end_header\n";
        let split = bytes
            .windows(END.len())
            .position(|w| w == END)
            .ok_or_else(|| FormatError::invalid("missing `end_header` line"))?;
        let header = std::str::from_utf8(&bytes[..split])
            .map_err(|_| FormatError::invalid("sonar header is not UTF-8"))?;
        let body = &bytes[split + END.len()..];
        let (first, rest) = header.split_once('\n').unwrap_or((header, ""));
        if first.trim() != SONAR_MAGIC {
            return Err(FormatError::line(1, format!("expected `{SONAR_MAGIC}`")));
        }

        let (mut beams, mut bins, mut h, mut v, mut range, mut enc) = (None, None, None, None, None, None);
        for mut e in format::parse_entries(rest)? {
            e.line += 1;
            match e.key {
                "num_beams" => beams = Some(e.parse::<usize>()?),
                "num_bins" => bins = Some(e.parse::<usize>()?),
                "h_aperture_deg" => h = Some(e.parse::<f64>()?),
                "v_aperture_deg" => v = Some(e.parse::<f64>()?),
                "max_range_m" => range = Some(e.parse::<f64>()?),
                "encoding" => {
                    enc = Some(match e.value {
                        "f64le" => SonarEncoding::F64Le,
                        "f32le" => SonarEncoding::F32Le,
                        "csv" => SonarEncoding::Csv,
                        other => return Err(FormatError::line(e.line, format!("unknown encoding `{other}`"))),
                    })
                }
                other => return Err(FormatError::line(e.line, format!("unknown key `{other}`"))),
            }
        }
        let beams = format::require(beams, "num_beams")?;
        let bins = format::require(bins, "num_bins")?;
        let aperture = SonarAperture::from_degrees(
            format::require(h, "h_aperture_deg")?,
            format::require(v, "v_aperture_deg")?,
            format::require(range, "max_range_m")?,
        )
        .map_err(|e| FormatError::invalid(e.to_string()))?;
        let n = beams
            .checked_mul(bins)
            .ok_or_else(|| FormatError::invalid("frame dimensions overflow"))?;

        let values: Vec<f64> = match format::require(enc, "encoding")? {
            SonarEncoding::F64Le => {
                if body.len() != n * 8 {
                    return Err(FormatError::invalid(format!(
                        "expected {} data bytes, got {}",
                        n * 8,
                        body.len()
                    )));
                }
                body.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect()
            }
            SonarEncoding::F32Le => {
                if body.len() != n * 4 {
                    return Err(FormatError::invalid(format!(
                        "expected {} data bytes, got {}",
                        n * 4,
                        body.len()
                    )));
                }
                body.chunks_exact(4)
                    .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                    .collect()
            }
            SonarEncoding::Csv => {
                let text = std::str::from_utf8(body)
                    .map_err(|_| FormatError::invalid("CSV body is not UTF-8"))?;
                let mut values = Vec::with_capacity(n);
                let mut rows = 0;
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    rows += 1;
                    let before = values.len();
                    for tok in line.split(',') {
                        values.push(tok.trim().parse::<f64>().map_err(|_| {
                            FormatError::invalid(format!("beam {}: invalid number `{}`", rows - 1, tok.trim()))
                        })?);
                    }
                    if values.len() - before != bins {
                        return Err(FormatError::invalid(format!(
                            "beam {} has {} values, expected {bins}",
                            rows - 1,
                            values.len() - before
                        )));
                    }
                }
                values
            }
        };
        SonarFrame::new(aperture, beams, bins, values).map_err(|e| FormatError::invalid(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        Self::decode(&format::read_bytes(path)?).map_err(|e| e.in_file(path))
    }

    pub fn write(&self, path: &Path, encoding: SonarEncoding) -> Result<(), FormatError> {
        format::write_bytes(path, &self.encode(encoding))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aperture() -> SonarAperture {
        SonarAperture::from_degrees(70.0, 12.0, 3.0).unwrap()
    }

    fn frame_from(beams: usize, bins: usize, f: impl Fn(usize, usize) -> f64) -> SonarFrame {
        let data = (0..beams * bins).map(|i| f(i / bins, i % bins)).collect();
        SonarFrame::new(aperture(), beams, bins, data).unwrap()
    }

    #[test]
    fn bearings_are_uniform_and_increasing() {
        let f = SonarFrame::zeros(aperture(), 4, 10).unwrap();
        let h = 70f64.to_radians();
        let expect = [-3.0 * h / 8.0, -h / 8.0, h / 8.0, 3.0 * h / 8.0];
        for (a, b) in f.bearings().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((f.bin_length() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn cfar_zero_frame_detects_nothing() {
        let f = SonarFrame::zeros(aperture(), 3, 64).unwrap();
        let mask = soca_cfar(&f, &CfarParams::default()).unwrap();
        assert_eq!(mask.count(), 0);
    }

    #[test]
    fn cfar_single_target() {
        let f = frame_from(2, 64, |b, i| if b == 1 && i == 30 { 0.9 } else { 0.1 });
        let p = CfarParams {
            train: 8,
            guard: 2,
            alpha: 3.0,
        };
        let mask = soca_cfar(&f, &p).unwrap();
        assert_eq!(mask.count(), 1);
        assert!(mask.get(1, 30));
    }

    #[test]
    fn cfar_adjacent_targets_both_detected() {
        // second target sits in the first one's lagging window; smallest-of
        // averaging falls back to the clean leading window
        let f = frame_from(1, 80, |_, i| match i {
            30 => 0.9,
            36 => 0.8,
            _ => 0.1,
        });
        let p = CfarParams {
            train: 8,
            guard: 2,
            alpha: 3.0,
        };
        let mask = soca_cfar(&f, &p).unwrap();
        assert!(mask.get(0, 30) && mask.get(0, 36));
        assert_eq!(mask.count(), 2);
    }

    #[test]
    fn cfar_edge_cells_never_detect_and_window_checked() {
        let f = frame_from(1, 30, |_, i| if i == 2 { 1.0 } else { 0.0 });
        let p = CfarParams {
            train: 4,
            guard: 1,
            alpha: 1.0,
        };
        assert_eq!(soca_cfar(&f, &p).unwrap().count(), 0);
        let p = CfarParams {
            train: 12,
            guard: 3,
            alpha: 1.0,
        };
        assert_eq!(
            soca_cfar(&f, &p),
            Err(SonarError::WindowTooLarge { window: 31, bins: 30 })
        );
    }

    #[test]
    fn nearest_return_keeps_closest_bin() {
        let f = frame_from(3, 100, |b, i| if b == 1 && (i == 40 || i == 47) { 0.9 } else { 0.0 });
        let mask = soca_cfar(&f, &CfarParams { train: 4, guard: 1, alpha: 2.0 }).unwrap();
        assert!(mask.get(1, 40) && mask.get(1, 47));
        let rets = nearest_return_per_bearing(&f, &mask).unwrap();
        assert_eq!(rets.len(), 1);
        assert_eq!(rets[0].beam, 1);
        assert!((rets[0].r - 40.5 * f.bin_length()).abs() < 1e-12);

        let empty = DetectionMask::new(3, 100, vec![false; 300]);
        assert!(nearest_return_per_bearing(&f, &empty).unwrap().is_empty());
        let wrong = DetectionMask::new(2, 100, vec![false; 200]);
        assert!(nearest_return_per_bearing(&f, &wrong).is_err());
    }

    #[test]
    fn dbscan_two_blobs() {
        let mut rets = Vec::new();
        for k in 0..5 {
            for (j, base) in [1.0, 2.0].iter().enumerate() {
                rets.push(PolarReturn {
                    beam: rets.len(),
                    r: base + 0.01 * k as f64,
                    theta: 0.001 * j as f64,
                    intensity: 1.0,
                });
            }
        }
        let cs = dbscan_cluster(&rets, &DbscanParams { eps: 0.1, min_pts: 3 }).unwrap();
        assert_eq!(cs.len(), 2);
        assert!(cs.noise.is_empty());
        assert!(dbscan_cluster(&[], &DbscanParams::default()).unwrap().is_empty());
        assert!(dbscan_cluster(&rets, &DbscanParams { eps: 0.0, min_pts: 3 }).is_err());
    }

    #[test]
    fn dbscan_border_goes_to_first_cluster() {
        // cores at x = 0 and x = 0.3 (min_pts 4, self included); the point
        // at 0.15 has only 3 neighbours but lies within eps of both cores
        let pts = [
            [0.0, 0.0],
            [-0.05, 0.0],
            [-0.1, 0.0],
            [-0.15, 0.0],
            [0.3, 0.0],
            [0.35, 0.0],
            [0.4, 0.0],
            [0.45, 0.0],
            [0.15, 0.0],
        ];
        let labels = dbscan_labels(&pts, 0.16, 4);
        assert_eq!(labels[..4], [Some(0); 4]);
        assert_eq!(labels[4..8], [Some(1); 4]);
        assert_eq!(labels[8], Some(0));
        // mirror the layout: the border point still joins cluster 0, which is
        // now the group on the other side
        let flipped: Vec<[f64; 2]> = pts.iter().map(|p| [0.3 - p[0], p[1]]).collect();
        let labels = dbscan_labels(&flipped, 0.16, 4);
        assert_eq!(labels[8], Some(0));
    }

    #[test]
    fn file_round_trip_all_encodings() {
        let f = frame_from(3, 5, |b, i| ((b * 5 + i) as f64) / 16.0);
        // sixteenths are exact in every encoding
        for enc in [SonarEncoding::F64Le, SonarEncoding::F32Le, SonarEncoding::Csv] {
            let back = SonarFrame::decode(&f.encode(enc)).unwrap();
            assert_eq!((back.num_beams(), back.num_bins()), (3, 5));
            assert_eq!(back.intensities(), f.intensities());
            let (a, b) = (back.aperture(), f.aperture());
            assert!((a.horizontal - b.horizontal).abs() < 1e-12);
            assert!((a.vertical - b.vertical).abs() < 1e-12);
            assert_eq!(a.max_range, b.max_range);
            // a second pass is a fixed point
            assert_eq!(SonarFrame::decode(&back.encode(enc)).unwrap().encode(enc), back.encode(enc));
        }
    }

    #[test]
    fn file_rejects_malformed() {
        let f = frame_from(2, 2, |_, _| 0.5);
        let good = f.encode(SonarEncoding::Csv);
        let text = String::from_utf8(good).unwrap();
        assert!(SonarFrame::decode(text.replace("OPTIFUSE", "X").as_bytes()).is_err());
        assert!(SonarFrame::decode(text.replace("num_bins=2", "num_bins=3").as_bytes()).is_err());
        assert!(SonarFrame::decode(text.replace("encoding=csv", "encoding=csv\nfoo=1").as_bytes()).is_err());
        assert!(SonarFrame::decode(text.replace("0.5,0.5\n", "0.5,1.5\n").as_bytes()).is_err());
        let mut bin = f.encode(SonarEncoding::F64Le);
        bin.pop();
        assert!(SonarFrame::decode(&bin).is_err());
    }
}
