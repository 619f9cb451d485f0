//! Direction ↔ pixel mappings and resampling between equirectangular,
//! orthographic fisheye and perspective images.
//!
//! World frame: +x is the front lens axis, +y points left of it, +z is up.
//! Equirectangular pixels use continuous coordinates with pixel `(i, j)`
//! covering `[i, i+1) × [j, j+1)`. Row 0 starts at the zenith; the
//! horizontal image center is the front axis and columns grow towards the
//! viewer's right (clockwise seen from above).

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radiance::{widen, HdrPanorama, LinearImage, Rgb, RgbImage};

/// Zenith angle `theta` in `[0, π]` from +z, azimuth `phi` in `[0, 2π)`
/// counter-clockwise from the front axis (+x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalDirection {
    pub theta: f64,
    pub phi: f64,
}

impl SphericalDirection {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta: theta.clamp(0.0, PI),
            phi: phi.rem_euclid(TAU),
        }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }

    /// `v` need not be normalized but must be nonzero.
    pub fn from_vector(v: &Vector3<f64>) -> Self {
        let horiz = v.x.hypot(v.y);
        let theta = horiz.atan2(v.z);
        let phi = v.y.atan2(v.x);
        Self::new(theta, phi)
    }

    /// Great-circle angle to `other`, radians.
    pub fn angle_to(self, other: SphericalDirection) -> f64 {
        let a = self.to_vector();
        let b = other.to_vector();
        a.cross(&b).norm().atan2(a.dot(&b))
    }
}

/// Continuous equirectangular pixel coordinates `(u, v)` of a direction.
pub fn dir_to_pixel(dir: SphericalDirection, width: usize, height: usize) -> (f64, f64) {
    let w = width as f64;
    let u = (0.5 * w - dir.phi * w / TAU).rem_euclid(w);
    let v = dir.theta * height as f64 / PI;
    (u, v)
}

pub fn pixel_to_dir(u: f64, v: f64, width: usize, height: usize) -> SphericalDirection {
    let w = width as f64;
    let phi = ((0.5 * w - u) * TAU / w).rem_euclid(TAU);
    let theta = v * PI / height as f64;
    SphericalDirection::new(theta, phi)
}

/// Pixel coordinates of an arbitrary (nonzero) world vector, with the map
/// rotated by `azimuth_offset` radians counter-clockwise about +z.
#[inline]
pub fn vector_to_pixel(
    v: &Vector3<f64>,
    azimuth_offset: f64,
    width: usize,
    height: usize,
) -> (f64, f64) {
    let d = SphericalDirection::from_vector(v);
    dir_to_pixel(
        SphericalDirection {
            theta: d.theta,
            phi: (d.phi - azimuth_offset).rem_euclid(TAU),
        },
        width,
        height,
    )
}

#[derive(Clone, Copy)]
enum Horizontal {
    Wrap,
    Clamp,
}

#[inline]
fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    // a + t (b - a) reproduces a constant exactly
    [
        a[0] + t * (b[0] - a[0]),
        a[1] + t * (b[1] - a[1]),
        a[2] + t * (b[2] - a[2]),
    ]
}

fn bilinear(img: &RgbImage, u: f64, v: f64, mode: Horizontal) -> [f64; 3] {
    let w = img.width() as i64;
    let h = img.height() as i64;
    let x = u - 0.5;
    let y = v - 0.5;
    let x0 = x.floor();
    let fx = x - x0;
    let x0 = x0 as i64;
    let (c0, c1, fx) = match mode {
        Horizontal::Wrap => (x0.rem_euclid(w), (x0 + 1).rem_euclid(w), fx),
        Horizontal::Clamp => {
            if x0 < 0 {
                (0, 0, 0.0)
            } else if x0 >= w - 1 {
                (w - 1, w - 1, 0.0)
            } else {
                (x0, x0 + 1, fx)
            }
        }
    };
    let y0f = y.floor();
    let (r0, r1, fy) = if y0f < 0.0 {
        (0, 0, 0.0)
    } else if y0f as i64 >= h - 1 {
        (h - 1, h - 1, 0.0)
    } else {
        (y0f as i64, y0f as i64 + 1, y - y0f)
    };
    let px = |c: i64, r: i64| widen(img.get(c as usize, r as usize));
    let top = lerp(px(c0, r0), px(c1, r0), fx);
    let bottom = lerp(px(c0, r1), px(c1, r1), fx);
    lerp(top, bottom, fy)
}

/// Bilinear sample of a full equirectangular image with azimuthal wraparound.
#[inline]
pub fn sample_equirect(img: &RgbImage, u: f64, v: f64) -> [f64; 3] {
    bilinear(img, u, v, Horizontal::Wrap)
}

/// Radiance of `img` (a full equirectangular raster) seen along `v`.
#[inline]
pub fn sample_direction(img: &RgbImage, v: &Vector3<f64>, azimuth_offset: f64) -> [f64; 3] {
    let (u, row) = vector_to_pixel(v, azimuth_offset, img.width(), img.height());
    sample_equirect(img, u, row)
}

/// Front-lens half of an equirectangular panorama: azimuth `[-π/2, π/2)`
/// about the front axis, square `h × h`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfEquirect {
    image: RgbImage,
}

impl HalfEquirect {
    pub fn image(&self) -> &RgbImage {
        &self.image
    }
}

/// Keeps columns `[w/4, 3w/4)` of every row.
pub fn crop_front_hemisphere(pano: &HdrPanorama) -> Result<HalfEquirect> {
    let (w, h) = (pano.width(), pano.height());
    if w != 2 * h {
        return Err(Error::DimensionMismatch(format!("expected w = 2h, got {w}x{h}")));
    }
    if w % 4 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "panorama width {w} is not divisible by 4"
        )));
    }
    Ok(HalfEquirect {
        image: pano.image().crop_columns(w / 4, 3 * w / 4),
    })
}

/// 180° fisheye in orthographic projection (`r = sin θ` from the front axis).
#[derive(Debug, Clone, PartialEq)]
pub struct OrthographicFisheye {
    side: usize,
    image: RgbImage,
    mask: Vec<bool>,
    valid_count: usize,
}

impl OrthographicFisheye {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    /// `true` where the pixel center lies inside the unit disk.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.side + x]
    }

    /// Number of pixel centers with `r ≤ 1`.
    pub fn valid_count(&self) -> usize {
        self.valid_count
    }

    /// Returns a copy with every channel multiplied by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            side: self.side,
            image: self.image.scaled(c),
            mask: self.mask.clone(),
            valid_count: self.valid_count,
        }
    }

    /// Builds a fisheye directly from a radiance function of the disk
    /// coordinates `(x, y)` (x right, y up, both in `[-1, 1]`).
    pub fn from_disk_fn(side: usize, f: impl Fn(f64, f64) -> Rgb + Sync) -> Result<Self> {
        let (mask, valid_count) = disk_mask(side);
        let image = RgbImage::from_fn(side, side, |j, i| {
            let (x, y) = disk_coords(side, j, i);
            if x * x + y * y <= 1.0 {
                f(x, y)
            } else {
                [0.0; 3]
            }
        })?;
        Ok(Self {
            side,
            image,
            mask,
            valid_count,
        })
    }
}

impl LinearImage for OrthographicFisheye {
    fn linear_image(&self) -> &RgbImage {
        &self.image
    }
}

/// Normalized disk coordinates of pixel center `(col, row)`.
#[inline]
pub fn disk_coords(side: usize, col: usize, row: usize) -> (f64, f64) {
    let s = side as f64;
    (
        2.0 * (col as f64 + 0.5) / s - 1.0,
        1.0 - 2.0 * (row as f64 + 0.5) / s,
    )
}

fn disk_mask(side: usize) -> (Vec<bool>, usize) {
    let mut mask = Vec::with_capacity(side * side);
    let mut count = 0;
    for row in 0..side {
        for col in 0..side {
            let (x, y) = disk_coords(side, col, row);
            let inside = x * x + y * y <= 1.0;
            count += inside as usize;
            mask.push(inside);
        }
    }
    (mask, count)
}

/// Resamples the front half-panorama into an orthographic fisheye of `side`
/// pixels. Pixels outside the unit disk are zero and masked invalid.
pub fn equirect_to_orthographic(half: &HalfEquirect, side: usize) -> Result<OrthographicFisheye> {
    if side < 2 {
        return Err(Error::invalid(format!("fisheye side must be ≥ 2, got {side}")));
    }
    let src = &half.image;
    let hw = src.width() as f64;
    let h = src.height() as f64;
    let (mask, valid_count) = disk_mask(side);
    let data: Vec<Rgb> = (0..side * side)
        .into_par_iter()
        .map(|idx| {
            if !mask[idx] {
                return [0.0; 3];
            }
            let (x, y) = disk_coords(side, idx % side, idx / side);
            // image right is world -y, image up is world +z
            let forward = (1.0 - (x * x + y * y)).max(0.0).sqrt();
            let theta = y.clamp(-1.0, 1.0).acos();
            let phi = (-x).atan2(forward);
            let u = 0.5 * hw - phi * hw / PI;
            let v = theta * h / PI;
            let s = bilinear(src, u, v, Horizontal::Clamp);
            [s[0] as f32, s[1] as f32, s[2] as f32]
        })
        .collect();
    Ok(OrthographicFisheye {
        side,
        image: RgbImage::from_raw(side, side, data),
        mask,
        valid_count,
    })
}

/// Gnomonic camera looking along `(yaw, pitch)`; yaw turns right (clockwise
/// seen from above), pitch up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveView {
    pub fov_deg: f64,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub width: usize,
    pub height: usize,
}

impl PerspectiveView {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::invalid(format!(
                "horizontal fov must lie in (0, 180) degrees, got {}",
                self.fov_deg
            )));
        }
        if self.pitch_deg.is_nan() || self.pitch_deg.abs() > 90.0 || !self.yaw_deg.is_finite() {
            return Err(Error::invalid(format!(
                "invalid orientation yaw={} pitch={}",
                self.yaw_deg, self.pitch_deg
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("perspective view has zero size"));
        }
        Ok(())
    }

    pub fn camera_basis(&self) -> CameraBasis {
        let heading = -self.yaw_deg.to_radians();
        let pitch = self.pitch_deg.to_radians();
        let (sh, ch) = heading.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let forward = Vector3::new(cp * ch, cp * sh, sp);
        let right = Vector3::new(sh, -ch, 0.0);
        let up = right.cross(&forward);
        let focal = 0.5 * self.width as f64 / (0.5 * self.fov_deg.to_radians()).tan();
        CameraBasis {
            forward,
            right,
            up,
            focal,
            half_width: 0.5 * self.width as f64,
            half_height: 0.5 * self.height as f64,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CameraBasis {
    pub forward: Vector3<f64>,
    pub right: Vector3<f64>,
    pub up: Vector3<f64>,
    focal: f64,
    half_width: f64,
    half_height: f64,
}

impl CameraBasis {
    /// Unit ray through continuous image position `(px, py)`.
    #[inline]
    pub fn ray(&self, px: f64, py: f64) -> Vector3<f64> {
        let a = (px - self.half_width) / self.focal;
        let b = (self.half_height - py) / self.focal;
        if a == 0.0 && b == 0.0 {
            return self.forward;
        }
        (self.forward + self.right * a + self.up * b).normalize()
    }
}

pub fn pano_to_perspective(pano: &HdrPanorama, view: &PerspectiveView) -> Result<RgbImage> {
    view.validate()?;
    let basis = view.camera_basis();
    let img = pano.image();
    let data: Vec<Rgb> = (0..view.width * view.height)
        .into_par_iter()
        .map(|idx| {
            let px = (idx % view.width) as f64 + 0.5;
            let py = (idx / view.width) as f64 + 0.5;
            let s = sample_direction(img, &basis.ray(px, py), 0.0);
            [s[0] as f32, s[1] as f32, s[2] as f32]
        })
        .collect();
    Ok(RgbImage::from_raw(view.width, view.height, data))
}
