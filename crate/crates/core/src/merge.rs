//! Exposure-bracket merging into a linear radiance panorama.
//!
//! Frames are assumed linear after decode (no response-curve recovery). Each
//! channel sample contributes `v / t` weighted by a hat function; samples at
//! or above [`SATURATION_LEVEL`] are discarded except in the shortest frame.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::radiance::{HdrPanorama, Rgb, RgbImage};

pub const SATURATION_LEVEL: f64 = 0.99;
pub const HAT_EXPONENT: i32 = 2;

#[derive(Debug, Clone)]
pub struct ExposureBracket {
    frames: Vec<RgbImage>,
    exposure_times: Vec<f64>,
}

impl ExposureBracket {
    pub fn new(frames: Vec<RgbImage>, exposure_times: Vec<f64>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyBracket);
        }
        if frames.len() != exposure_times.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} frames but {} exposure times",
                frames.len(),
                exposure_times.len()
            )));
        }
        let (w, h) = (frames[0].width(), frames[0].height());
        if let Some(f) = frames.iter().find(|f| f.width() != w || f.height() != h) {
            return Err(Error::DimensionMismatch(format!(
                "frame is {}x{}, expected {w}x{h}",
                f.width(),
                f.height()
            )));
        }
        if let Some(t) = exposure_times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::invalid(format!("exposure time must be > 0, got {t}")));
        }
        for (i, a) in exposure_times.iter().enumerate() {
            if exposure_times[i + 1..].contains(a) {
                return Err(Error::invalid(format!("duplicate exposure time {a}")));
            }
        }
        Ok(Self {
            frames,
            exposure_times,
        })
    }

    pub fn frames(&self) -> &[RgbImage] {
        &self.frames
    }

    pub fn exposure_times(&self) -> &[f64] {
        &self.exposure_times
    }
}

/// `max(0, 1 - |2v - 1|^p)`.
#[inline]
pub fn hat_weight(v: f64) -> f64 {
    (1.0 - (2.0 * v - 1.0).abs().powi(HAT_EXPONENT)).max(0.0)
}

pub fn merge_brackets(bracket: &ExposureBracket) -> Result<HdrPanorama> {
    let first = &bracket.frames[0];
    let (w, h) = (first.width(), first.height());
    if w != 2 * h {
        return Err(Error::DimensionMismatch(format!(
            "bracket frames must be 2:1 equirectangular, got {w}x{h}"
        )));
    }
    // shortest first so the saturation exemption and fallbacks are order-free
    let mut order: Vec<usize> = (0..bracket.frames.len()).collect();
    order.sort_by(|a, b| bracket.exposure_times[*a].total_cmp(&bracket.exposure_times[*b]));
    let frames: Vec<&RgbImage> = order.iter().map(|&i| &bracket.frames[i]).collect();
    let times: Vec<f64> = order.iter().map(|&i| bracket.exposure_times[i]).collect();

    let data: Vec<Rgb> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let mut out = [0.0f32; 3];
            for (c, slot) in out.iter_mut().enumerate() {
                let samples = frames.iter().map(|f| f.pixels()[i][c] as f64);
                *slot = merge_channel(samples, &times) as f32;
            }
            out
        })
        .collect();
    HdrPanorama::new(RgbImage::new(w, h, data)?)
}

/// Merges one channel; `times` sorted ascending, `samples` in the same order.
fn merge_channel(samples: impl Iterator<Item = f64>, times: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut shortest = 0.0;
    let mut longest = 0.0;
    for (j, v) in samples.enumerate() {
        let t = times[j];
        if j == 0 {
            shortest = v / t;
        }
        longest = v / t;
        if j > 0 && v >= SATURATION_LEVEL {
            continue;
        }
        let wgt = hat_weight(v);
        num += wgt * (v / t);
        den += wgt;
    }
    if den > 0.0 {
        num / den
    } else if shortest * times[0] >= 0.5 {
        // clipped everywhere: the shortest exposure is the least wrong
        shortest
    } else {
        // black everywhere: the longest exposure has the best SNR
        longest
    }
}
