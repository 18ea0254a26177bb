//! Floating-point raster images and 8-bit PNM interchange.

use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};

use crate::format::{self, FormatError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImageError {
    #[error("expected {expected} samples for {width}x{height}x{channels}, got {got}")]
    SizeMismatch {
        width: usize,
        height: usize,
        channels: usize,
        expected: usize,
        got: usize,
    },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(usize),
    #[error("sample {index} = {value} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
}

/// Row-major image with 1 (gray) or 3 (RGB) channels, samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl CameraImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, ImageError> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels(channels));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(ImageError::SizeMismatch {
                width,
                height,
                channels,
                expected,
                got: data.len(),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
        {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(channels == 1 || channels == 3);
        assert!((0.0..=1.0).contains(&value));
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Build from a per-pixel closure returning one value per channel.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub(crate) fn from_raw_clamped(width: usize, height: usize, channels: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Luminance `0.299 R + 0.587 G + 0.114 B`; gray images are returned as-is.
    pub fn to_gray(&self) -> CameraImage {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        Self::from_raw_clamped(self.width, self.height, 1, data)
    }

    /// 8-bit samples, `round(v · 255)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_bytes(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self, ImageError> {
        Self::new(
            width,
            height,
            channels,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    /// Decode PGM (P5), PPM (P6) or PNG bytes.
    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        let img = image::load_from_memory(bytes)
            .map_err(|e| FormatError::invalid(format!("cannot decode image: {e}")))?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let out = match img {
            DynamicImage::ImageLuma8(buf) => Self::from_bytes(w, h, 1, buf.as_raw()),
            DynamicImage::ImageRgb8(buf) => Self::from_bytes(w, h, 3, buf.as_raw()),
            DynamicImage::ImageLumaA8(_) => Self::from_bytes(w, h, 1, img.to_luma8().as_raw()),
            DynamicImage::ImageRgba8(_) => Self::from_bytes(w, h, 3, img.to_rgb8().as_raw()),
            other => {
                return Err(FormatError::invalid(format!(
                    "unsupported sample format {:?}; only 8-bit images are accepted",
                    other.color()
                )))
            }
        };
        out.map_err(|e| FormatError::invalid(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        Self::decode(&format::read_bytes(path)?).map_err(|e| e.in_file(path))
    }

    /// Binary PNM: P5 for gray images, P6 for RGB.
    pub fn encode_pnm(&self) -> Vec<u8> {
        encode_pnm(self.width, self.height, self.channels, &self.to_bytes())
    }

    pub fn write_pnm(&self, path: &Path) -> Result<(), FormatError> {
        format::write_bytes(path, &self.encode_pnm())
    }
}

pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub(crate) fn encode_pnm(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Vec<u8> {
    let (subtype, color) = if channels == 1 {
        (PnmSubtype::Graymap(SampleEncoding::Binary), ExtendedColorType::L8)
    } else {
        (PnmSubtype::Pixmap(SampleEncoding::Binary), ExtendedColorType::Rgb8)
    };
    let mut out = Cursor::new(Vec::new());
    PnmEncoder::new(&mut out)
        .with_subtype(subtype)
        .write_image(bytes, width as u32, height as u32, color)
        .expect("in-memory PNM encoding cannot fail for a well-sized buffer");
    out.into_inner()
}
