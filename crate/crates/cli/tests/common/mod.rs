#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use panostage_core::io::write_exr;
use panostage_core::radiance::{Calibration, HdrPanorama, RgbImage};

/// Sequence whose ScaleLast fill on a 4.0 m wall is offsets [0, 0.9, 1.5, 2.26, 3.16].
pub const FOUR_METRE_SEQUENCE: [&str; 5] = ["base_900", "base_600", "base_760", "base_900", "base_600"];

pub fn uniform_pano(width: usize, value: f32) -> RgbImage {
    RgbImage::filled(width, width / 2, [value; 3]).unwrap()
}

/// Smooth, non-uniform sky brighter toward the zenith, with an azimuthal ripple.
pub fn sky_pano(width: usize) -> RgbImage {
    let h = width / 2;
    RgbImage::from_fn(width, h, |x, y| {
        let theta = (y as f64 + 0.5) / h as f64 * std::f64::consts::PI;
        let phi = (x as f64 + 0.5) / width as f64 * std::f64::consts::TAU;
        let v = 1.0 + 0.6 * theta.cos() + 0.2 * (2.0 * phi).sin() * theta.sin();
        [v as f32, (0.9 * v) as f32, (0.8 * v) as f32]
    })
    .unwrap()
}

pub fn calibrated(img: RgbImage) -> HdrPanorama {
    HdrPanorama::with_calibration(img, Calibration::Calibrated(1.0)).unwrap()
}

pub fn write_layout(path: &Path, corners: &[[f64; 2]], kitchen_walls: &[usize]) {
    let json = serde_json::json!({
        "corners_m": corners,
        "height_m": 2.7,
        "kitchen_walls": kitchen_walls,
    });
    fs::write(path, serde_json::to_string_pretty(&json).unwrap()).unwrap();
}

/// Workspace with a 4 m × 3 m room (kitchen on wall 0), a calibrated sky and one extra panorama.
pub fn workspace(dir: &Path) -> PathBuf {
    write_layout(&dir.join("layout.json"), &[[0.0, 0.0], [4.0, 0.0], [4.0, 3.0], [0.0, 3.0]], &[0]);
    write_exr(&dir.join("environment.exr"), &sky_pano(64), Some(1.0)).unwrap();
    write_exr(&dir.join("living_room.exr"), &uniform_pano(32, 0.25), None).unwrap();
    dir.to_path_buf()
}

pub fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("panostage")
        .chain(list.iter().copied())
        .map(String::from)
        .collect()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
