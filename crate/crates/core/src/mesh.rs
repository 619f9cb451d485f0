//! Indexed triangle meshes and Wavefront OBJ I/O.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub positions: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

/// A named sub-mesh; the name doubles as the material slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshPart {
    pub slot: String,
    pub mesh: Mesh,
}

impl Mesh {
    /// Axis-aligned box with outward-facing triangles.
    pub fn cuboid(min: [f64; 3], max: [f64; 3]) -> Self {
        let [x0, y0, z0] = min;
        let [x1, y1, z1] = max;
        let positions = vec![
            [x0, y0, z0],
            [x1, y0, z0],
            [x1, y1, z0],
            [x0, y1, z0],
            [x0, y0, z1],
            [x1, y0, z1],
            [x1, y1, z1],
            [x0, y1, z1],
        ];
        let triangles = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        Self {
            positions,
            triangles,
        }
    }

    /// Planar quad `a b c d` (counter-clockwise seen from the front side).
    pub fn quad(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> Self {
        Self {
            positions: vec![a, b, c, d],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn append(&mut self, other: &Mesh) {
        let base = self.positions.len() as u32;
        self.positions.extend_from_slice(&other.positions);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }

    pub fn map_positions(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Mesh {
        Mesh {
            positions: self.positions.iter().map(|p| f(*p)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// `(min, max)` corners; `None` for an empty mesh.
    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = *self.positions.first()?;
        Some(self.positions.iter().fold((first, first), |(mut lo, mut hi), p| {
            for i in 0..3 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
            (lo, hi)
        }))
    }
}

/// Bounds over several parts.
pub fn parts_bounds(parts: &[MeshPart]) -> Option<([f64; 3], [f64; 3])> {
    parts
        .iter()
        .filter_map(|p| p.mesh.bounds())
        .reduce(|(alo, ahi), (blo, bhi)| {
            (
                [alo[0].min(blo[0]), alo[1].min(blo[1]), alo[2].min(blo[2])],
                [ahi[0].max(bhi[0]), ahi[1].max(bhi[1]), ahi[2].max(bhi[2])],
            )
        })
}

/// Serializes parts as one OBJ with an `o` block per part. Coordinates are
/// written in shortest round-trip form.
pub fn obj_string(parts: &[MeshPart]) -> String {
    let mut out = String::new();
    let mut base = 1usize;
    for part in parts {
        let _ = writeln!(out, "o {}", part.slot);
        for p in &part.mesh.positions {
            let _ = writeln!(out, "v {:?} {:?} {:?}", p[0], p[1], p[2]);
        }
        for t in &part.mesh.triangles {
            let _ = writeln!(
                out,
                "f {} {} {}",
                t[0] as usize + base,
                t[1] as usize + base,
                t[2] as usize + base
            );
        }
        base += part.mesh.positions.len();
    }
    out
}

pub fn write_obj(path: &Path, parts: &[MeshPart]) -> Result<()> {
    fs::write(path, obj_string(parts)).map_err(|e| Error::io(path, e))
}

/// Loads every `o`/`g` block of an OBJ file as a triangulated part.
///
/// Only positions and faces are read; polygons are fan-triangulated and
/// negative (relative) indices are supported. Each part keeps its vertices in
/// file order.
pub fn read_obj(path: &Path) -> Result<Vec<MeshPart>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text).map_err(|msg| Error::format(path, msg))
}

pub fn parse_obj(text: &str) -> std::result::Result<Vec<MeshPart>, String> {
    let mut positions: Vec<[f64; 3]> = Vec::new();
    // (slot, faces as global vertex indices)
    let mut groups: Vec<(String, Vec<[usize; 3]>)> = vec![("body".to_string(), Vec::new())];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        let Some(head) = tok.next() else { continue };
        match head {
            "v" => {
                let mut p = [0.0; 3];
                for c in p.iter_mut() {
                    *c = tok
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| format!("line {}: malformed vertex", lineno + 1))?;
                }
                positions.push(p);
            }
            "f" => {
                let mut idx = Vec::new();
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| format!("line {}: malformed face index '{t}'", lineno + 1))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else {
                        positions.len() as i64 + i
                    };
                    if resolved < 0 || resolved as usize >= positions.len() {
                        return Err(format!("line {}: face index {i} out of range", lineno + 1));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    continue;
                }
                let faces = &mut groups.last_mut().expect("non-empty").1;
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            "o" | "g" => {
                let name = tok.collect::<Vec<_>>().join(" ");
                let name = if name.is_empty() { "body".to_string() } else { name };
                if groups.last().is_some_and(|g| g.1.is_empty()) {
                    groups.last_mut().expect("non-empty").0 = name;
                } else {
                    groups.push((name, Vec::new()));
                }
            }
            _ => {}
        }
    }
    let mut parts: Vec<MeshPart> = Vec::new();
    for (slot, faces) in groups {
        if faces.is_empty() {
            continue;
        }
        let mut used: Vec<usize> = faces.iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        let local = |g: usize| used.binary_search(&g).expect("referenced") as u32;
        let mesh = Mesh {
            positions: used.iter().map(|&g| positions[g]).collect(),
            triangles: faces.iter().map(|f| [local(f[0]), local(f[1]), local(f[2])]).collect(),
        };
        match parts.iter_mut().find(|p| p.slot == slot) {
            Some(p) => p.mesh.append(&mesh),
            None => parts.push(MeshPart { slot, mesh }),
        }
    }
    if parts.is_empty() {
        return Err("OBJ file contains no faces".to_string());
    }
    Ok(parts)
}
