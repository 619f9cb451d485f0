//! Linear-radiance images, calibration state and luminance maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Luminous efficacy applied to linear RGB radiance, lm/W.
pub const LUMINOUS_EFFICACY: f64 = 179.0;

/// Rec. 709 luma weights.
pub const REC709_WEIGHTS: [f64; 3] = [0.2126, 0.7152, 0.0722];

pub type Rgb = [f32; 3];

/// Photometric luminance (cd/m² once calibrated) of one linear RGB triple.
#[inline]
pub fn luminance_of(rgb: [f64; 3]) -> f64 {
    LUMINOUS_EFFICACY
        * (REC709_WEIGHTS[0] * rgb[0] + REC709_WEIGHTS[1] * rgb[1] + REC709_WEIGHTS[2] * rgb[2])
}

#[inline]
pub(crate) fn widen(rgb: Rgb) -> [f64; 3] {
    [rgb[0] as f64, rgb[1] as f64, rgb[2] as f64]
}

fn check_pixel(rgb: &Rgb) -> bool {
    rgb.iter().all(|c| c.is_finite() && *c >= 0.0)
}

/// Row-major linear RGB image with finite, nonnegative channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<Rgb>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels supplied for a {width}x{height} image",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|p| !check_pixel(p)) {
            return Err(Error::invalid(format!(
                "pixel ({}, {}) has a negative or non-finite channel: {:?}",
                i % width,
                i / width,
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: Rgb) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> Rgb + Sync,
    ) -> Result<Self> {
        let data: Vec<Rgb> = (0..width * height)
            .into_par_iter()
            .map(|i| f(i % width, i / width))
            .collect();
        Self::new(width, height, data)
    }

    /// Skips validation; callers guarantee every channel is finite and ≥ 0.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<Rgb>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.data
    }

    pub fn into_pixels(self) -> Vec<Rgb> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.width + x]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, Rgb> {
        self.data.chunks(self.width)
    }

    /// Copies the column range `[x0, x1)` of every row.
    pub fn crop_columns(&self, x0: usize, x1: usize) -> RgbImage {
        assert!(x0 < x1 && x1 <= self.width);
        let mut data = Vec::with_capacity((x1 - x0) * self.height);
        for row in self.rows() {
            data.extend_from_slice(&row[x0..x1]);
        }
        RgbImage::from_raw(x1 - x0, self.height, data)
    }

    /// Multiplies every channel by `k` (evaluated in f64, stored as f32).
    pub fn scaled(&self, k: f64) -> RgbImage {
        let data = self
            .data
            .par_iter()
            .map(|p| {
                [
                    (p[0] as f64 * k) as f32,
                    (p[1] as f64 * k) as f32,
                    (p[2] as f64 * k) as f32,
                ]
            })
            .collect();
        RgbImage::from_raw(self.width, self.height, data)
    }
}

/// Anything that carries a linear RGB raster.
pub trait LinearImage {
    fn linear_image(&self) -> &RgbImage;
}

impl LinearImage for RgbImage {
    fn linear_image(&self) -> &RgbImage {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", content = "k", rename_all = "snake_case")]
pub enum Calibration {
    Uncalibrated,
    Calibrated(f64),
}

impl Calibration {
    pub fn factor(&self) -> Option<f64> {
        match self {
            Calibration::Uncalibrated => None,
            Calibration::Calibrated(k) => Some(*k),
        }
    }

    pub fn is_calibrated(&self) -> bool {
        matches!(self, Calibration::Calibrated(_))
    }
}

/// Equirectangular (w = 2h) linear-radiance panorama.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrPanorama {
    image: RgbImage,
    calibration: Calibration,
}

impl HdrPanorama {
    pub fn new(image: RgbImage) -> Result<Self> {
        Self::with_calibration(image, Calibration::Uncalibrated)
    }

    pub fn with_calibration(image: RgbImage, calibration: Calibration) -> Result<Self> {
        if image.width() != 2 * image.height() {
            return Err(Error::DimensionMismatch(format!(
                "equirectangular panorama must be 2:1, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        if let Calibration::Calibrated(k) = calibration {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::invalid(format!("calibration factor must be > 0, got {k}")));
            }
        }
        Ok(Self { image, calibration })
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    pub fn calibration(&self) -> Calibration {
        self.calibration
    }

    pub fn into_image(self) -> RgbImage {
        self.image
    }
}

impl LinearImage for HdrPanorama {
    fn linear_image(&self) -> &RgbImage {
        &self.image
    }
}

/// Per-pixel scalar luminance, cd/m² when derived from a calibrated source.
#[derive(Debug, Clone, PartialEq)]
pub struct LuminanceMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl LuminanceMap {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// `L = 179 · (0.2126 R + 0.7152 G + 0.0722 B)` per pixel.
pub fn luminance_map<I: LinearImage + ?Sized>(image: &I) -> Result<LuminanceMap> {
    let img = image.linear_image();
    if let Some(i) = img.pixels().iter().position(|p| !check_pixel(p)) {
        return Err(Error::invalid(format!(
            "pixel {i} has a negative or NaN channel"
        )));
    }
    let values = img
        .pixels()
        .par_iter()
        .map(|p| luminance_of(widen(*p)))
        .collect();
    Ok(LuminanceMap {
        width: img.width(),
        height: img.height(),
        values,
    })
}

/// Multiplies every channel by `k` and composes `k` into the calibration state.
pub fn scale_radiance(pano: &HdrPanorama, k: f64) -> Result<HdrPanorama> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::invalid(format!(
            "scale factor must be positive and finite, got {k}"
        )));
    }
    let calibration = match pano.calibration {
        Calibration::Uncalibrated => Calibration::Calibrated(k),
        Calibration::Calibrated(prev) => {
            log::info!("re-calibrating panorama: k {prev} composed with {k}");
            Calibration::Calibrated(prev * k)
        }
    };
    HdrPanorama::with_calibration(pano.image.scaled(k), calibration)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pano(rgb: Rgb) -> HdrPanorama {
        HdrPanorama::new(RgbImage::filled(8, 4, rgb).unwrap()).unwrap()
    }

    #[test]
    fn rejects_wrong_aspect() {
        let img = RgbImage::filled(6, 4, [0.0; 3]).unwrap();
        assert!(matches!(
            HdrPanorama::new(img),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rejects_negative_and_nan_pixels() {
        assert!(RgbImage::new(1, 1, vec![[-1.0, 0.0, 0.0]]).is_err());
        assert!(RgbImage::new(1, 1, vec![[f32::NAN, 0.0, 0.0]]).is_err());
        assert!(RgbImage::new(2, 1, vec![[0.0; 3]]).is_err());
    }

    #[test]
    fn luminance_examples() {
        let black = luminance_map(&pano([0.0, 0.0, 0.0])).unwrap();
        assert!(black.values.iter().all(|v| *v == 0.0));

        let white = luminance_map(&pano([1.0, 1.0, 1.0])).unwrap();
        assert!(white.values.iter().all(|v| (v - 179.0).abs() < 1e-9));

        let green = luminance_map(&pano([0.0, 1.0, 0.0])).unwrap();
        assert!(green.values.iter().all(|v| (v - 128.0208).abs() < 1e-9));
        assert_eq!(green.width, 8);
        assert_eq!(green.height, 4);
    }

    #[test]
    fn scale_examples() {
        let p = pano([0.5, 0.5, 0.5]);
        let same = scale_radiance(&p, 1.0).unwrap();
        assert_eq!(same.image(), p.image());
        assert_eq!(same.calibration(), Calibration::Calibrated(1.0));

        let doubled = scale_radiance(&p, 2.0).unwrap();
        assert!(doubled.image().pixels().iter().all(|px| *px == [1.0, 1.0, 1.0]));

        let back = scale_radiance(&scale_radiance(&p, 3.7).unwrap(), 1.0 / 3.7).unwrap();
        for (a, b) in back.image().pixels().iter().zip(p.image().pixels()) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() <= 2.0 * f32::EPSILON * b[c]);
            }
        }
        assert!((back.calibration().factor().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scale_rejects_bad_factor() {
        let p = pano([0.5; 3]);
        for k in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(scale_radiance(&p, k).is_err());
        }
    }

    #[test]
    fn calibration_composes() {
        let p = pano([0.25; 3]);
        let twice = scale_radiance(&scale_radiance(&p, 2.0).unwrap(), 3.0).unwrap();
        assert_eq!(twice.calibration(), Calibration::Calibrated(6.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn luminance_is_linear_in_scale(
                r in 0.0f32..10.0, g in 0.0f32..10.0, b in 0.0f32..10.0, k in 0.01f64..100.0
            ) {
                let p = pano([r, g, b]);
                let base = luminance_map(&p).unwrap();
                let scaled = luminance_map(&scale_radiance(&p, k).unwrap()).unwrap();
                for (s, v) in scaled.values.iter().zip(&base.values) {
                    // f32 storage of the scaled pixel bounds the agreement
                    prop_assert!((s - k * v).abs() <= 1e-6 * (k * v).max(1e-30));
                }
            }

            #[test]
            fn luminance_is_order_independent(seed in 0u64..1000) {
                let w = 8; let h = 4;
                let img = RgbImage::from_fn(w, h, |x, y| {
                    let v = ((x * 31 + y * 17) as u64 ^ seed) as f32 % 7.0;
                    [v, v * 0.5, v * 0.25]
                }).unwrap();
                let lum = luminance_map(&img).unwrap();
                // reversing traversal order must not change any value
                let reversed: Vec<Rgb> = img.pixels().iter().rev().copied().collect();
                let rev_img = RgbImage::new(w, h, reversed).unwrap();
                let rev_lum = luminance_map(&rev_img).unwrap();
                let n = w * h;
                for i in 0..n {
                    prop_assert_eq!(lum.values[i], rev_lum.values[n - 1 - i]);
                }
            }
        }
    }
}
