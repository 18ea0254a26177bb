//! Synthetic turbidity using the underwater image formation model
//! `I = J·t + (1 − t)·B` with per-channel transmission `t = exp(−β·d)`.

use std::fmt;
use std::str::FromStr;

use crate::raster::CameraImage;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TurbidityError {
    #[error("turbidity needs an RGB image, got {0} channel(s)")]
    GrayscaleInput(usize),
    #[error("depth must be positive, got {0}")]
    InvalidDepth(f64),
    #[error("background light must lie in [0, 1]")]
    InvalidBackground,
}

/// Per-channel values in RGB order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rgb {
    pub red: f64,
    pub green: f64,
    pub blue: f64,
}

impl Rgb {
    pub const fn new(red: f64, green: f64, blue: f64) -> Self {
        Self { red, green, blue }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.red, self.green, self.blue]
    }
}

/// Average background light of turbid water.
pub const DEFAULT_BACKGROUND: Rgb = Rgb::new(0.6240, 0.805, 0.7651);

/// Jerlov water types with tabulated attenuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaterType {
    I,
    C5,
    C7,
    C9,
}

/// How the three tabulated attenuation columns map onto channels. The source
/// table labels its columns red, blue, green in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnOrder {
    /// Take the column labels literally: red, blue, green.
    #[default]
    AsLabelled,
    /// Read the columns as red, green, blue.
    Rgb,
}

impl WaterType {
    pub const ALL: [WaterType; 4] = [WaterType::I, WaterType::C5, WaterType::C7, WaterType::C9];

    /// Attenuation columns as printed: (first, second, third).
    pub fn table_row(self) -> [f64; 3] {
        match self {
            WaterType::I => [0.85, 0.96, 0.98],
            WaterType::C5 => [0.67, 0.73, 0.67],
            WaterType::C7 => [0.62, 0.61, 0.50],
            WaterType::C9 => [0.55, 0.46, 0.29],
        }
    }

    /// Attenuation coefficients `β` in 1/m.
    pub fn beta(self, order: ColumnOrder) -> Rgb {
        let [a, b, c] = self.table_row();
        match order {
            ColumnOrder::AsLabelled => Rgb::new(a, c, b),
            ColumnOrder::Rgb => Rgb::new(a, b, c),
        }
    }
}

impl fmt::Display for WaterType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WaterType::I => "I",
            WaterType::C5 => "5C",
            WaterType::C7 => "7C",
            WaterType::C9 => "9C",
        })
    }
}

impl FromStr for WaterType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "I" => Ok(WaterType::I),
            "5C" => Ok(WaterType::C5),
            "7C" => Ok(WaterType::C7),
            "9C" => Ok(WaterType::C9),
            _ => Err(format!("unknown water type `{s}` (expected I, 5C, 7C or 9C)")),
        }
    }
}

/// Whether attenuation is taken as tabulated or relative to type I.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttenuationMode {
    /// `β_eff = max(β_type − β_I, 0)`: the input is assumed to already show
    /// type-I water. Negative differences are clamped so no channel is
    /// amplified.
    #[default]
    Relative,
    /// `β_eff = β_type`.
    Absolute,
}

impl fmt::Display for AttenuationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttenuationMode::Relative => "relative",
            AttenuationMode::Absolute => "absolute",
        })
    }
}

impl FromStr for AttenuationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relative" => Ok(AttenuationMode::Relative),
            "absolute" => Ok(AttenuationMode::Absolute),
            _ => Err(format!("unknown attenuation mode `{s}` (expected relative or absolute)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbidityParams {
    pub water: WaterType,
    pub depth_m: f64,
    pub background: Rgb,
    pub mode: AttenuationMode,
    pub column_order: ColumnOrder,
}

impl TurbidityParams {
    pub fn new(water: WaterType, depth_m: f64, mode: AttenuationMode) -> Self {
        Self {
            water,
            depth_m,
            background: DEFAULT_BACKGROUND,
            mode,
            column_order: ColumnOrder::default(),
        }
    }

    fn validate(&self) -> Result<(), TurbidityError> {
        if !(self.depth_m > 0.0) {
            return Err(TurbidityError::InvalidDepth(self.depth_m));
        }
        if !self
            .background
            .to_array()
            .iter()
            .all(|b| (0.0..=1.0).contains(b))
        {
            return Err(TurbidityError::InvalidBackground);
        }
        Ok(())
    }

    pub fn effective_beta(&self) -> Rgb {
        let beta = self.water.beta(self.column_order);
        match self.mode {
            AttenuationMode::Absolute => beta,
            AttenuationMode::Relative => {
                let clear = WaterType::I.beta(self.column_order);
                Rgb::new(
                    (beta.red - clear.red).max(0.0),
                    (beta.green - clear.green).max(0.0),
                    (beta.blue - clear.blue).max(0.0),
                )
            }
        }
    }
}

/// Per-channel transmission `exp(−β_eff · d)`.
pub fn transmission(params: &TurbidityParams) -> Rgb {
    let b = params.effective_beta();
    let t = |beta: f64| (-beta * params.depth_m).exp();
    Rgb::new(t(b.red), t(b.green), t(b.blue))
}

/// Blend every pixel toward the background light.
pub fn apply_turbidity(img: &CameraImage, params: &TurbidityParams) -> Result<CameraImage, TurbidityError> {
    if img.channels() != 3 {
        return Err(TurbidityError::GrayscaleInput(img.channels()));
    }
    params.validate()?;
    let t = transmission(params).to_array();
    let b = params.background.to_array();
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|px| (0..3).map(move |c| px[c] * t[c] + (1.0 - t[c]) * b[c]))
        .collect();
    Ok(CameraImage::from_raw_clamped(img.width(), img.height(), 3, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_one_relative_is_clear() {
        let p = TurbidityParams::new(WaterType::I, 3.0, AttenuationMode::Relative);
        assert_eq!(transmission(&p), Rgb::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn absolute_type_9c_red() {
        let p = TurbidityParams::new(WaterType::C9, 1.0, AttenuationMode::Absolute);
        assert!((transmission(&p).red - 0.5769498).abs() < 1e-6);
    }

    #[test]
    fn relative_clamps_negative_coefficients() {
        // every tabulated coefficient is below its type-I counterpart
        for w in WaterType::ALL {
            let p = TurbidityParams::new(w, 1.0, AttenuationMode::Relative);
            assert_eq!(p.effective_beta(), Rgb::new(0.0, 0.0, 0.0), "{w}");
        }
    }

    #[test]
    fn column_order_mapping() {
        assert_eq!(WaterType::C9.beta(ColumnOrder::AsLabelled), Rgb::new(0.55, 0.29, 0.46));
        assert_eq!(WaterType::C9.beta(ColumnOrder::Rgb), Rgb::new(0.55, 0.46, 0.29));
    }

    #[test]
    fn worked_example_5c() {
        let img = CameraImage::filled(2, 2, 3, 0.5);
        let p = TurbidityParams::new(WaterType::C5, 1.0, AttenuationMode::Absolute);
        let out = apply_turbidity(&img, &p).unwrap();
        assert!((out.get(0, 0, 0) - 0.5605).abs() < 1e-4);
    }

    #[test]
    fn far_depth_converges_to_background() {
        let img = CameraImage::from_fn(4, 4, 3, |x, y, _| (x + y) as f64 / 6.0).unwrap();
        let p = TurbidityParams::new(WaterType::C9, 1e4, AttenuationMode::Absolute);
        let out = apply_turbidity(&img, &p).unwrap();
        for px in out.data().chunks_exact(3) {
            for (v, b) in px.iter().zip(DEFAULT_BACKGROUND.to_array()) {
                assert!((v - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn monotone_toward_background() {
        let b = DEFAULT_BACKGROUND.red;
        let mut prev_dark = 0.1;
        let mut prev_bright = 0.95;
        for d in [0.5, 1.0, 2.0, 4.0] {
            let p = TurbidityParams::new(WaterType::C7, d, AttenuationMode::Absolute);
            let img = CameraImage::new(2, 1, 3, vec![0.1, 0.1, 0.1, 0.95, 0.95, 0.95]).unwrap();
            let out = apply_turbidity(&img, &p).unwrap();
            let (dark, bright) = (out.get(0, 0, 0), out.get(1, 0, 0));
            assert!(dark > prev_dark && dark < b);
            assert!(bright < prev_bright && bright > b);
            prev_dark = dark;
            prev_bright = bright;
        }
    }

    #[test]
    fn rejects_gray_and_bad_depth() {
        let gray = CameraImage::filled(2, 2, 1, 0.5);
        let p = TurbidityParams::new(WaterType::C5, 1.0, AttenuationMode::Absolute);
        assert_eq!(apply_turbidity(&gray, &p), Err(TurbidityError::GrayscaleInput(1)));
        let rgb = CameraImage::filled(2, 2, 3, 0.5);
        let p = TurbidityParams::new(WaterType::C5, 0.0, AttenuationMode::Absolute);
        assert!(apply_turbidity(&rgb, &p).is_err());
    }

    #[test]
    fn water_type_parsing() {
        for w in WaterType::ALL {
            assert_eq!(w.to_string().parse::<WaterType>().unwrap(), w);
        }
        assert_eq!("9c".parse::<WaterType>().unwrap(), WaterType::C9);
        assert!("3C".parse::<WaterType>().is_err());
    }
}
