use std::path::Path;

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use super::room::RoomLayout;
use crate::error::{Error, Result};
use crate::projection::pixel_to_dir;

pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.5;

/// Per-column kitchen mask over the panorama azimuth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KitchenMask(pub Vec<bool>);

/// Run-length form: `{"width": w, "runs": [[start, length], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunLengthMask {
    pub width: usize,
    pub runs: Vec<[usize; 2]>,
}

impl KitchenMask {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn from_runs(rle: &RunLengthMask) -> Result<Self> {
        let mut cols = vec![false; rle.width];
        for &[start, len] in &rle.runs {
            if start + len > rle.width {
                return Err(Error::invalid(format!(
                    "mask run [{start}, {len}] exceeds width {}",
                    rle.width
                )));
            }
            cols[start..start + len].iter_mut().for_each(|c| *c = true);
        }
        Ok(Self(cols))
    }

    pub fn to_runs(&self) -> RunLengthMask {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < self.0.len() {
            if self.0[i] {
                let s = i;
                while i < self.0.len() && self.0[i] {
                    i += 1;
                }
                runs.push([s, i - s]);
            } else {
                i += 1;
            }
        }
        RunLengthMask {
            width: self.0.len(),
            runs,
        }
    }

    /// Loads a mask image (a column is masked when any pixel in it is
    /// nonzero) or a run-length JSON file.
    pub fn load(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        if ext == "json" {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let rle: RunLengthMask =
                serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
            return Self::from_runs(&rle);
        }
        let img = image::open(path)
            .map_err(|e| Error::format(path, e))?
            .into_luma8();
        let (w, h) = img.dimensions();
        let cols = (0..w)
            .map(|x| (0..h).any(|y| img.get_pixel(x, y)[0] > 0))
            .collect();
        Ok(Self(cols))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallCoverage {
    pub wall: usize,
    /// Columns whose horizontal ray from the camera first hits this wall.
    pub columns: usize,
    pub masked: usize,
}

impl WallCoverage {
    pub fn fraction(&self) -> f64 {
        if self.columns == 0 {
            0.0
        } else {
            self.masked as f64 / self.columns as f64
        }
    }
}

/// Distance along `dir` from `origin` to the first wall, with the wall index.
pub fn cast_ray(layout: &RoomLayout, origin: Point2<f64>, dir: Vector2<f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for wall in layout.walls() {
        let e = wall.end - wall.start;
        let denom = dir.perp(&e);
        if denom.abs() < 1e-15 {
            continue;
        }
        let w = wall.start - origin;
        let t = w.perp(&e) / denom;
        let s = w.perp(&dir) / denom;
        if t > 1e-12 && (-1e-12..=1.0 + 1e-12).contains(&s) && best.is_none_or(|(_, bt)| t < bt) {
            best = Some((wall.index, t));
        }
    }
    best
}

/// Azimuth (CCW from the layout +x axis) of mask column `col`; the panorama
/// front direction is assumed aligned with +x of the layout frame.
pub fn column_azimuth(col: usize, width: usize) -> f64 {
    pixel_to_dir(col as f64 + 0.5, 0.5, width, (width / 2).max(1)).phi
}

pub fn wall_coverage(
    layout: &RoomLayout,
    mask: &KitchenMask,
    camera: Option<Point2<f64>>,
) -> Result<Vec<WallCoverage>> {
    if mask.is_empty() {
        return Err(Error::invalid("kitchen mask is empty"));
    }
    let origin = camera.unwrap_or_else(|| layout.camera());
    if !layout.contains(&origin) {
        return Err(Error::invalid(format!("camera {origin} lies outside the room")));
    }
    let mut cov: Vec<WallCoverage> = (0..layout.wall_count())
        .map(|wall| WallCoverage {
            wall,
            columns: 0,
            masked: 0,
        })
        .collect();
    let w = mask.len();
    for col in 0..w {
        let phi = column_azimuth(col, w);
        if let Some((wall, _)) = cast_ray(layout, origin, Vector2::new(phi.cos(), phi.sin())) {
            cov[wall].columns += 1;
            cov[wall].masked += mask.0[col] as usize;
        }
    }
    Ok(cov)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallSelection {
    /// A wall is flagged when strictly more than this fraction of its columns
    /// are masked.
    pub threshold: f64,
    pub camera: Option<[f64; 2]>,
}

impl Default for WallSelection {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_COVERAGE_THRESHOLD,
            camera: None,
        }
    }
}

/// Flags the walls the kitchen mask predominantly covers.
pub fn select_kitchen_walls(
    layout: &RoomLayout,
    mask: &KitchenMask,
    opts: &WallSelection,
) -> Result<RoomLayout> {
    let camera = opts.camera.map(|c| Point2::new(c[0], c[1]));
    let cov = wall_coverage(layout, mask, camera)?;
    let flagged: Vec<usize> = cov
        .iter()
        .filter(|c| c.columns > 0 && c.fraction() > opts.threshold)
        .map(|c| c.wall)
        .collect();
    if flagged.is_empty() {
        return Err(Error::NoKitchenWall);
    }
    let mut out = layout.clone();
    out.set_kitchen_walls(&flagged)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayoutType {
    I,
    L,
    U,
}

/// Flagged walls ordered along the floor polygon (counter-clockwise).
pub fn kitchen_run(layout: &RoomLayout) -> Result<Vec<usize>> {
    let n = layout.wall_count();
    let flagged = layout.kitchen_walls();
    match flagged.len() {
        0 => return Err(Error::NoKitchenWall),
        1..=3 => {}
        k => return Err(Error::UnsupportedWallCount(k)),
    }
    if flagged.len() == n {
        return Err(Error::invalid("kitchen walls close a loop around the room"));
    }
    let starts: Vec<usize> = flagged
        .iter()
        .copied()
        .filter(|&i| !layout.is_kitchen_wall((i + n - 1) % n))
        .collect();
    if starts.len() != 1 {
        return Err(Error::NonContiguousKitchenWalls(flagged));
    }
    Ok((0..flagged.len()).map(|k| (starts[0] + k) % n).collect())
}

pub fn classify_layout(layout: &RoomLayout) -> Result<LayoutType> {
    Ok(match kitchen_run(layout)?.len() {
        1 => LayoutType::I,
        2 => LayoutType::L,
        _ => LayoutType::U,
    })
}
