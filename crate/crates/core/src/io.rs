//! Image file I/O: OpenEXR (lossless f32), Radiance RGBE, LDR PNG brackets
//! and tone-mapped PNG previews.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use exr::prelude::{self as exrp, ReadChannels, ReadLayers, WritableImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::merge::ExposureBracket;
use crate::radiance::{luminance_of, widen, Calibration, HdrPanorama, Rgb, RgbImage};

/// EXR header attribute carrying the calibration factor of a panorama.
pub const CALIBRATION_ATTRIBUTE: &str = "panostage_calibration_k";

/// Exposure scale maps this luminance percentile ...
pub const TONEMAP_PERCENTILE: f64 = 0.95;
/// ... to this display value before gamma.
pub const TONEMAP_TARGET: f64 = 0.9;
pub const DISPLAY_GAMMA: f64 = 2.2;

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Writes RGB as 32-bit float channels; an optional calibration factor is
/// stored as a custom header attribute.
pub fn write_exr(path: &Path, image: &RgbImage, calibration: Option<f64>) -> Result<()> {
    let w = image.width();
    let layer = exrp::Layer::new(
        (w, image.height()),
        exrp::LayerAttributes::named("rgb"),
        exrp::Encoding::FAST_LOSSLESS,
        exrp::SpecificChannels::rgb(|pos: exrp::Vec2<usize>| {
            let p = image.pixels()[pos.y() * w + pos.x()];
            (p[0], p[1], p[2])
        }),
    );
    let mut img = exrp::Image::from_layer(layer);
    if let Some(k) = calibration {
        img.attributes.other.insert(
            exrp::Text::from(CALIBRATION_ATTRIBUTE),
            exrp::AttributeValue::F64(k),
        );
    }
    img.write()
        .to_file(path)
        .map_err(|e| Error::format(path, e))
}

/// Reads the first RGB(A) layer as f32 and the calibration attribute, if any.
pub fn read_exr(path: &Path) -> Result<(RgbImage, Option<f64>)> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    let image = exrp::read()
        .no_deep_data()
        .largest_resolution_level()
        .rgba_channels(
            |res, _channels: &exrp::RgbaChannels| RawPixels {
                width: res.width(),
                data: vec![[0.0f32; 3]; res.width() * res.height()],
            },
            |px: &mut RawPixels, pos, (r, g, b, _a): (f32, f32, f32, f32)| {
                px.data[pos.y() * px.width + pos.x()] = [r, g, b];
            },
        )
        .first_valid_layer()
        .all_attributes()
        .from_file(path)
        .map_err(|e| Error::format(path, e))?;
    let k = image
        .attributes
        .other
        .get(&exrp::Text::from(CALIBRATION_ATTRIBUTE))
        .or_else(|| {
            image
                .layer_data
                .attributes
                .other
                .get(&exrp::Text::from(CALIBRATION_ATTRIBUTE))
        })
        .and_then(|v| match v {
            exrp::AttributeValue::F64(k) => Some(*k),
            exrp::AttributeValue::F32(k) => Some(*k as f64),
            _ => None,
        });
    let size = image.layer_data.size;
    let pixels = image.layer_data.channel_data.pixels;
    let img = RgbImage::new(size.width(), size.height(), pixels.data)
        .map_err(|e| Error::format(path, e))?;
    Ok((img, k))
}

struct RawPixels {
    width: usize,
    data: Vec<Rgb>,
}

pub fn write_rgbe(path: &Path, image: &RgbImage) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let pixels: Vec<image::Rgb<f32>> = image.pixels().iter().map(|p| image::Rgb(*p)).collect();
    image::codecs::hdr::HdrEncoder::new(std::io::BufWriter::new(file))
        .encode(&pixels, image.width(), image.height())
        .map_err(|e| Error::format(path, e))
}

pub fn read_rgbe(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| Error::format(path, e))?.into_rgb32f();
    let (w, h) = img.dimensions();
    let data = img
        .pixels()
        .map(|p| [p[0].max(0.0), p[1].max(0.0), p[2].max(0.0)])
        .collect();
    RgbImage::new(w as usize, h as usize, data).map_err(|e| Error::format(path, e))
}

/// Loads an equirectangular panorama from `.exr` or `.hdr`/`.pic`.
pub fn load_panorama(path: &Path) -> Result<HdrPanorama> {
    let (img, k) = match extension(path).as_str() {
        "exr" => read_exr(path)?,
        "hdr" | "pic" => (read_rgbe(path)?, None),
        other => {
            return Err(Error::format(
                path,
                format!("unsupported panorama format '{other}' (expected exr or hdr)"),
            ))
        }
    };
    let cal = match k {
        Some(k) => Calibration::Calibrated(k),
        None => Calibration::Uncalibrated,
    };
    HdrPanorama::with_calibration(img, cal).map_err(|e| Error::format(path, e))
}

pub fn save_panorama(path: &Path, pano: &HdrPanorama) -> Result<()> {
    save_linear(path, pano.image(), pano.calibration().factor())
}

/// Writes a linear image by extension: EXR, RGBE, or tone-mapped PNG.
pub fn save_linear(path: &Path, image: &RgbImage, calibration: Option<f64>) -> Result<()> {
    match extension(path).as_str() {
        "exr" => write_exr(path, image, calibration),
        "hdr" | "pic" => write_rgbe(path, image),
        "png" => fs::write(path, tonemap_png(image)?).map_err(|e| Error::io(path, e)),
        other => Err(Error::format(
            path,
            format!("unsupported output format '{other}'"),
        )),
    }
}

/// Width and height without decoding pixel data.
pub fn image_dimensions(path: &Path) -> Result<(usize, usize)> {
    match extension(path).as_str() {
        "exr" => {
            let meta = exrp::MetaData::read_from_file(path, false)
                .map_err(|e| Error::format(path, e))?;
            let header = meta
                .headers
                .first()
                .ok_or_else(|| Error::format(path, "no layers"))?;
            Ok((header.layer_size.width(), header.layer_size.height()))
        }
        _ => {
            let (w, h) = image::image_dimensions(path).map_err(|e| Error::format(path, e))?;
            Ok((w as usize, h as usize))
        }
    }
}

/// Reads an 8- or 16-bit PNG and normalizes to `[0, 1]` without any transfer
/// curve (the camera output is treated as linear).
pub fn read_ldr_png(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| Error::format(path, e))?;
    let rgb = img.into_rgb16();
    let (w, h) = rgb.dimensions();
    let data = rgb
        .pixels()
        .map(|p| {
            [
                p[0] as f32 / 65535.0,
                p[1] as f32 / 65535.0,
                p[2] as f32 / 65535.0,
            ]
        })
        .collect();
    RgbImage::new(w as usize, h as usize, data).map_err(|e| Error::format(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketSidecar {
    pub frames: Vec<SidecarFrame>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarFrame {
    pub path: PathBuf,
    pub exposure_s: f64,
}

/// Loads a bracket described by `{"frames":[{"path":..., "exposure_s":...}]}`;
/// relative frame paths resolve against the sidecar's directory.
pub fn load_bracket(sidecar: &Path) -> Result<ExposureBracket> {
    let text = fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
    let spec: BracketSidecar =
        serde_json::from_str(&text).map_err(|e| Error::format(sidecar, e))?;
    let base = sidecar.parent().unwrap_or(Path::new("."));
    let mut frames = Vec::with_capacity(spec.frames.len());
    let mut times = Vec::with_capacity(spec.frames.len());
    for f in &spec.frames {
        let p = if f.path.is_absolute() {
            f.path.clone()
        } else {
            base.join(&f.path)
        };
        frames.push(read_ldr_png(&p)?);
        times.push(f.exposure_s);
    }
    ExposureBracket::new(frames, times)
}

/// Exposure that maps the 95th-percentile luminance to 0.9 on the display.
pub fn auto_exposure(image: &RgbImage) -> f64 {
    let mut lum: Vec<f64> = image
        .pixels()
        .iter()
        .map(|p| luminance_of(widen(*p)))
        .collect();
    lum.sort_by(f64::total_cmp);
    let idx = ((lum.len() - 1) as f64 * TONEMAP_PERCENTILE).floor() as usize;
    // luminance_of includes the efficacy factor; exposure acts on raw RGB
    let p = lum[idx] / crate::radiance::LUMINOUS_EFFICACY;
    if p > 0.0 {
        TONEMAP_TARGET / p
    } else {
        1.0
    }
}

/// Global exposure + gamma 2.2, 8-bit sRGB-ordered bytes.
pub fn tonemap_rgb8(image: &RgbImage, exposure: f64) -> Vec<u8> {
    let inv_gamma = 1.0 / DISPLAY_GAMMA;
    image
        .pixels()
        .iter()
        .flat_map(|p| {
            widen(*p).map(|c| {
                let v = (c * exposure).clamp(0.0, 1.0).powf(inv_gamma);
                (v * 255.0).round() as u8
            })
        })
        .collect()
}

/// Encodes a display preview PNG of a linear image.
pub fn tonemap_png(image: &RgbImage) -> Result<Vec<u8>> {
    let bytes = tonemap_rgb8(image, auto_exposure(image));
    let buf = image::RgbImage::from_raw(image.width() as u32, image.height() as u32, bytes)
        .ok_or_else(|| Error::Numeric("preview buffer size mismatch".into()))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::format("<png>", e))?;
    Ok(out.into_inner())
}
