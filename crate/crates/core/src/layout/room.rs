use std::path::Path;

use nalgebra::{Point2, Rotation2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular opening on a wall plane, in wall coordinates: `offset_m` along
/// the wall from its start corner, `sill_m` above the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowOpening {
    pub wall: usize,
    pub offset_m: f64,
    pub width_m: f64,
    pub sill_m: f64,
    pub height_m: f64,
}

/// On-disk room layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomLayoutFile {
    pub corners_m: Vec<[f64; 2]>,
    pub height_m: f64,
    #[serde(default)]
    pub kitchen_walls: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub windows: Vec<WindowOpening>,
    /// Capture position in the layout frame; defaults to the floor centroid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_m: Option<[f64; 2]>,
}

/// Derived view of one polygon edge. Wall `i` runs from corner `i` to corner
/// `i + 1`; for a counter-clockwise floor the inward normal is the direction
/// rotated by +90°.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub index: usize,
    pub start: Point2<f64>,
    pub end: Point2<f64>,
    pub length: f64,
    pub direction: Vector2<f64>,
    pub inward_normal: Vector2<f64>,
}

impl Wall {
    pub fn point_at(&self, s: f64) -> Point2<f64> {
        self.start + self.direction * s
    }

    /// Signed distance of `p` from the wall line, positive towards the room.
    pub fn signed_distance(&self, p: &Point2<f64>) -> f64 {
        (p - self.start).dot(&self.inward_normal)
    }
}

/// Floor polygon (counter-clockwise, meters), ceiling height and kitchen flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomLayout {
    corners: Vec<Point2<f64>>,
    height: f64,
    kitchen: Vec<bool>,
    windows: Vec<WindowOpening>,
    camera: Option<Point2<f64>>,
}

impl RoomLayout {
    pub fn new(corners: Vec<Point2<f64>>, height: f64) -> Result<Self> {
        let n = corners.len();
        let layout = Self {
            corners,
            height,
            kitchen: vec![false; n],
            windows: Vec::new(),
            camera: None,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn from_file(file: &RoomLayoutFile) -> Result<Self> {
        let corners = file
            .corners_m
            .iter()
            .map(|c| Point2::new(c[0], c[1]))
            .collect();
        let mut layout = Self::new(corners, file.height_m)?;
        layout.set_kitchen_walls(&file.kitchen_walls)?;
        for w in &file.windows {
            layout.add_window(*w)?;
        }
        if let Some(c) = file.camera_m {
            layout.set_camera(Point2::new(c[0], c[1]))?;
        }
        Ok(layout)
    }

    pub fn to_file(&self) -> RoomLayoutFile {
        RoomLayoutFile {
            corners_m: self.corners.iter().map(|c| [c.x, c.y]).collect(),
            height_m: self.height,
            kitchen_walls: self.kitchen_walls(),
            windows: self.windows.clone(),
            camera_m: self.camera.map(|c| [c.x, c.y]),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: RoomLayoutFile =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        Self::from_file(&file)
    }

    fn validate(&self) -> Result<()> {
        let n = self.corners.len();
        if n < 3 {
            return Err(Error::invalid(format!("floor polygon needs ≥ 3 corners, got {n}")));
        }
        if self.corners.iter().any(|c| !(c.x.is_finite() && c.y.is_finite())) {
            return Err(Error::invalid("non-finite corner coordinate"));
        }
        if !(self.height.is_finite() && self.height > 0.0) {
            return Err(Error::invalid(format!("ceiling height must be > 0, got {}", self.height)));
        }
        for i in 0..n {
            if (self.corners[(i + 1) % n] - self.corners[i]).norm() <= 1e-9 {
                return Err(Error::invalid(format!("wall {i} has zero length")));
            }
        }
        if self.signed_area() <= 0.0 {
            return Err(Error::invalid("floor polygon must be counter-clockwise"));
        }
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a0, a1) = (self.corners[i], self.corners[(i + 1) % n]);
                let (b0, b1) = (self.corners[j], self.corners[(j + 1) % n]);
                if segments_intersect(a0, a1, b0, b1) {
                    return Err(Error::invalid(format!(
                        "floor polygon self-intersects (walls {i} and {j})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn corners(&self) -> &[Point2<f64>] {
        &self.corners
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn wall_count(&self) -> usize {
        self.corners.len()
    }

    pub fn wall(&self, i: usize) -> Wall {
        let n = self.corners.len();
        let start = self.corners[i];
        let end = self.corners[(i + 1) % n];
        let d = end - start;
        let length = d.norm();
        let direction = d / length;
        Wall {
            index: i,
            start,
            end,
            length,
            direction,
            inward_normal: Vector2::new(-direction.y, direction.x),
        }
    }

    pub fn walls(&self) -> impl Iterator<Item = Wall> + '_ {
        (0..self.corners.len()).map(|i| self.wall(i))
    }

    pub fn is_kitchen_wall(&self, i: usize) -> bool {
        self.kitchen[i]
    }

    pub fn kitchen_walls(&self) -> Vec<usize> {
        (0..self.kitchen.len()).filter(|&i| self.kitchen[i]).collect()
    }

    pub fn set_kitchen_walls(&mut self, walls: &[usize]) -> Result<()> {
        let n = self.corners.len();
        if let Some(w) = walls.iter().find(|w| **w >= n) {
            return Err(Error::invalid(format!("kitchen wall {w} out of range (room has {n})")));
        }
        self.kitchen = vec![false; n];
        for &w in walls {
            self.kitchen[w] = true;
        }
        Ok(())
    }

    pub fn windows(&self) -> &[WindowOpening] {
        &self.windows
    }

    pub fn add_window(&mut self, w: WindowOpening) -> Result<()> {
        if w.wall >= self.corners.len() {
            return Err(Error::invalid(format!("window on unknown wall {}", w.wall)));
        }
        let len = self.wall(w.wall).length;
        let ok = w.offset_m >= 0.0
            && w.width_m > 0.0
            && w.offset_m + w.width_m <= len + 1e-9
            && w.sill_m >= 0.0
            && w.height_m > 0.0
            && w.sill_m + w.height_m <= self.height + 1e-9;
        if !ok {
            return Err(Error::invalid(format!(
                "window {w:?} does not fit on wall {} ({len} m x {} m)",
                w.wall, self.height
            )));
        }
        self.windows.push(w);
        Ok(())
    }

    /// Capture position: explicit camera if set, else the area centroid.
    pub fn camera(&self) -> Point2<f64> {
        self.camera.unwrap_or_else(|| self.centroid())
    }

    pub fn set_camera(&mut self, p: Point2<f64>) -> Result<()> {
        if !self.contains(&p) {
            return Err(Error::invalid(format!("camera {p} lies outside the floor polygon")));
        }
        self.camera = Some(p);
        Ok(())
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.corners.len();
        0.5 * (0..n)
            .map(|i| {
                let a = self.corners[i];
                let b = self.corners[(i + 1) % n];
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
    }

    pub fn centroid(&self) -> Point2<f64> {
        let n = self.corners.len();
        let a = self.signed_area();
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let p = self.corners[i];
            let q = self.corners[(i + 1) % n];
            let cross = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * cross;
            cy += (p.y + q.y) * cross;
        }
        Point2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Even-odd point-in-polygon test; boundary points within `1e-9` count as
    /// inside.
    pub fn contains(&self, p: &Point2<f64>) -> bool {
        point_in_polygon(&self.corners, p, 1e-9)
    }

    /// Rigidly moves the room: rotate by `angle` about the origin, then
    /// translate. Flags, windows and camera follow.
    pub fn transformed(&self, angle: f64, translation: Vector2<f64>) -> RoomLayout {
        let r = Rotation2::new(angle);
        let mv = |p: &Point2<f64>| r * p + translation;
        RoomLayout {
            corners: self.corners.iter().map(mv).collect(),
            height: self.height,
            kitchen: self.kitchen.clone(),
            windows: self.windows.clone(),
            camera: self.camera.as_ref().map(mv),
        }
    }
}

fn orient(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> f64 {
    (b - a).perp(&(c - a))
}

fn segments_intersect(a0: Point2<f64>, a1: Point2<f64>, b0: Point2<f64>, b1: Point2<f64>) -> bool {
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point2<f64>, q: Point2<f64>, r: Point2<f64>, d: f64| {
        d == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(b0, b1, a0, d1) || on(b0, b1, a1, d2) || on(a0, a1, b0, d3) || on(a0, a1, b1, d4)
}

pub(crate) fn distance_to_segment(p: &Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

pub(crate) fn point_in_polygon(poly: &[Point2<f64>], p: &Point2<f64>, tol: f64) -> bool {
    let n = poly.len();
    for i in 0..n {
        if distance_to_segment(p, poly[i], poly[(i + 1) % n]) <= tol {
            return true;
        }
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (poly[i], poly[j]);
        if (pi.y > p.y) != (pj.y > p.y) && p.x < (pj.x - pi.x) * (p.y - pi.y) / (pj.y - pi.y) + pi.x
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::fixtures::rect;

    #[test]
    fn walls_have_inward_normals() {
        let room = rect(4.0, 3.0);
        let w0 = room.wall(0);
        assert_eq!(w0.inward_normal, Vector2::new(0.0, 1.0));
        assert_eq!(w0.length, 4.0);
        let w1 = room.wall(1);
        assert_eq!(w1.inward_normal, Vector2::new(-1.0, 0.0));
        assert_eq!(room.centroid(), Point2::new(2.0, 1.5));
        assert!(room.contains(&Point2::new(4.0, 1.0)));
        assert!(!room.contains(&Point2::new(4.1, 1.0)));
    }

    #[test]
    fn rejects_invalid_polygons() {
        let cw = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ];
        assert!(RoomLayout::new(cw, 2.5).is_err());
        let bowtie = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 2.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.0, 2.0),
        ];
        assert!(RoomLayout::new(bowtie, 2.5).is_err());
        assert!(RoomLayout::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)], 2.5).is_err());
        let tri = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        assert!(RoomLayout::new(tri.clone(), 0.0).is_err());
        assert!(RoomLayout::new(tri, 2.0).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"corners_m":[[0,0],[4,0],[4,3],[0,3]],"height_m":2.6,"kitchen_walls":[1,2],
            "windows":[{"wall":0,"offset_m":1.0,"width_m":1.2,"sill_m":0.9,"height_m":1.2}]}"#;
        let file: RoomLayoutFile = serde_json::from_str(text).unwrap();
        let layout = RoomLayout::from_file(&file).unwrap();
        assert_eq!(layout.kitchen_walls(), vec![1, 2]);
        assert_eq!(layout.to_file(), file);
        let bad = r#"{"corners_m":[[0,0],[4,0],[4,3]],"height_m":2.6,"kitchen_walls":[3]}"#;
        let file: RoomLayoutFile = serde_json::from_str(bad).unwrap();
        assert!(RoomLayout::from_file(&file).is_err());
    }

    #[test]
    fn window_must_fit() {
        let mut room = rect(4.0, 3.0);
        let w = WindowOpening {
            wall: 0,
            offset_m: 3.5,
            width_m: 1.0,
            sill_m: 0.9,
            height_m: 1.0,
        };
        assert!(room.add_window(w).is_err());
        assert!(room.add_window(WindowOpening { offset_m: 2.5, ..w }).is_ok());
    }
}
