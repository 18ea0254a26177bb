//! Pipeline configuration as `key=value` text.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::format::{self, FormatError};
use crate::fusion::FusionParams;
use crate::simulate::NoiseParams;
use crate::turbidity::{AttenuationMode, ColumnOrder};

/// Default elevation rays per simulated sonar beam; odd so that zero
/// elevation is sampled.
pub const DEFAULT_ELEVATION_SAMPLES: usize = 121;

const KEYS: [&str; 19] = [
    "sigma",
    "block",
    "offset",
    "marker_frac",
    "dilate_px",
    "min_region_px",
    "cfar_train",
    "cfar_guard",
    "cfar_alpha",
    "dbscan_eps",
    "dbscan_min_pts",
    "arc_sample_cap",
    "row_stride",
    "column_fill",
    "turbidity_mode",
    "turbidity_columns",
    "noise_seed",
    "noise_amplitude",
    "elevation_samples",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub fusion: FusionParams,
    pub turbidity_mode: AttenuationMode,
    pub turbidity_columns: ColumnOrder,
    pub noise: NoiseParams,
    pub elevation_samples: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fusion: FusionParams::default(),
            turbidity_mode: AttenuationMode::default(),
            turbidity_columns: ColumnOrder::default(),
            noise: NoiseParams::default(),
            elevation_samples: DEFAULT_ELEVATION_SAMPLES,
        }
    }
}

impl PipelineConfig {
    pub fn new() -> Self {
        Self::default()
    }

    /// Check every field against its documented domain.
    pub fn validate(&self) -> Result<(), String> {
        let s = &self.fusion.segment;
        let checks: [(bool, &str); 12] = [
            (s.sigma > 0.0 && s.sigma.is_finite(), "sigma must be positive"),
            (s.block >= 3 && s.block % 2 == 1, "block must be odd and at least 3"),
            (s.offset.is_finite(), "offset must be finite"),
            ((0.0..1.0).contains(&s.marker_frac), "marker_frac must lie in [0, 1)"),
            (self.fusion.cfar.train >= 1, "cfar_train must be at least 1"),
            (
                self.fusion.cfar.alpha > 0.0 && self.fusion.cfar.alpha.is_finite(),
                "cfar_alpha must be positive",
            ),
            (
                self.fusion.dbscan.eps > 0.0 && self.fusion.dbscan.eps.is_finite(),
                "dbscan_eps must be positive",
            ),
            (self.fusion.dbscan.min_pts >= 1, "dbscan_min_pts must be at least 1"),
            (self.fusion.arc_sample_cap >= 2, "arc_sample_cap must be at least 2"),
            (self.fusion.row_stride >= 1, "row_stride must be at least 1"),
            (
                (0.0..=1.0).contains(&self.noise.amplitude),
                "noise_amplitude must lie in [0, 1]",
            ),
            (self.elevation_samples >= 1, "elevation_samples must be at least 1"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(msg.to_string()),
            None => Ok(()),
        }
    }

    /// Parse a config file; absent keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut c = Self::new();
        for e in format::parse_entries(text)? {
            let f = &mut c.fusion;
            match e.key {
                "sigma" => f.segment.sigma = e.parse()?,
                "block" => f.segment.block = e.parse()?,
                "offset" => f.segment.offset = e.parse()?,
                "marker_frac" => f.segment.marker_frac = e.parse()?,
                "dilate_px" => f.segment.dilate_px = e.parse()?,
                "min_region_px" => f.segment.min_region_px = e.parse()?,
                "cfar_train" => f.cfar.train = e.parse()?,
                "cfar_guard" => f.cfar.guard = e.parse()?,
                "cfar_alpha" => f.cfar.alpha = e.parse()?,
                "dbscan_eps" => f.dbscan.eps = e.parse()?,
                "dbscan_min_pts" => f.dbscan.min_pts = e.parse()?,
                "arc_sample_cap" => f.arc_sample_cap = e.parse()?,
                "row_stride" => f.row_stride = e.parse()?,
                "column_fill" => f.column_fill = e.parse()?,
                "turbidity_mode" => c.turbidity_mode = e.parse()?,
                "turbidity_columns" => c.turbidity_columns = parse_columns(e.value, e.line)?,
                "noise_seed" => c.noise.seed = e.parse()?,
                "noise_amplitude" => c.noise.amplitude = e.parse()?,
                "elevation_samples" => c.elevation_samples = e.parse()?,
                other => {
                    return Err(FormatError::line(
                        e.line,
                        format!("unknown key `{other}` (expected one of {})", KEYS.join(", ")),
                    ))
                }
            }
        }
        c.validate().map_err(FormatError::invalid)?;
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        Self::parse(&format::read_text(path)?).map_err(|e| e.in_file(path))
    }
}

fn parse_columns(value: &str, line: usize) -> Result<ColumnOrder, FormatError> {
    match value {
        "as_labelled" => Ok(ColumnOrder::AsLabelled),
        "rgb" => Ok(ColumnOrder::Rgb),
        other => Err(FormatError::line(
            line,
            format!("unknown column order `{other}` (expected as_labelled or rgb)"),
        )),
    }
}

impl FromStr for PipelineConfig {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.fusion;
        let s = &p.segment;
        writeln!(f, "sigma={}", s.sigma)?;
        writeln!(f, "block={}", s.block)?;
        writeln!(f, "offset={}", s.offset)?;
        writeln!(f, "marker_frac={}", s.marker_frac)?;
        writeln!(f, "dilate_px={}", s.dilate_px)?;
        writeln!(f, "min_region_px={}", s.min_region_px)?;
        writeln!(f, "cfar_train={}", p.cfar.train)?;
        writeln!(f, "cfar_guard={}", p.cfar.guard)?;
        writeln!(f, "cfar_alpha={}", p.cfar.alpha)?;
        writeln!(f, "dbscan_eps={}", p.dbscan.eps)?;
        writeln!(f, "dbscan_min_pts={}", p.dbscan.min_pts)?;
        writeln!(f, "arc_sample_cap={}", p.arc_sample_cap)?;
        writeln!(f, "row_stride={}", p.row_stride)?;
        writeln!(f, "column_fill={}", p.column_fill)?;
        writeln!(f, "turbidity_mode={}", self.turbidity_mode)?;
        let cols = match self.turbidity_columns {
            ColumnOrder::AsLabelled => "as_labelled",
            ColumnOrder::Rgb => "rgb",
        };
        writeln!(f, "turbidity_columns={cols}")?;
        writeln!(f, "noise_seed={}", self.noise.seed)?;
        writeln!(f, "noise_amplitude={}", self.noise.amplitude)?;
        writeln!(f, "elevation_samples={}", self.elevation_samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::ColumnFill;

    #[test]
    fn default_render() {
        let expected = "\
sigma=2
block=31
offset=0.02
marker_frac=0.5
dilate_px=3
min_region_px=334
cfar_train=16
cfar_guard=4
cfar_alpha=5
dbscan_eps=0.1
dbscan_min_pts=3
arc_sample_cap=256
row_stride=1
column_fill=skip
turbidity_mode=relative
turbidity_columns=as_labelled
noise_seed=1
noise_amplitude=0.05
elevation_samples=121
";
        assert_eq!(PipelineConfig::new().to_string(), expected);
    }

    #[test]
    fn round_trip_and_overrides() {
        let c = PipelineConfig::new();
        assert_eq!(c.to_string().parse::<PipelineConfig>().unwrap(), c);
        let c: PipelineConfig = "# tuned\nmin_region_px = 100\ncolumn_fill=nearest\nturbidity_columns=rgb\n"
            .parse()
            .unwrap();
        assert_eq!(c.fusion.segment.min_region_px, 100);
        assert_eq!(c.fusion.column_fill, ColumnFill::Nearest);
        assert_eq!(c.turbidity_columns, ColumnOrder::Rgb);
        assert_eq!(c.fusion.cfar.train, 16);
        assert_eq!("".parse::<PipelineConfig>().unwrap(), PipelineConfig::new());
    }

    #[test]
    fn rejects_bad_config() {
        for bad in [
            "sigmaa=2",
            "block=30",
            "sigma=0",
            "cfar_alpha=-1",
            "dbscan_min_pts=0",
            "column_fill=all",
            "noise_amplitude=2",
            "row_stride=0",
            "sigma=2\nsigma=3",
            "marker_frac=1",
        ] {
            assert!(bad.parse::<PipelineConfig>().is_err(), "{bad}");
        }
    }
}
