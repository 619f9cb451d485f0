//! Renderer-neutral scene assembly, irradiance probes and a direct-lighting
//! preview.

mod bvh;
mod export;
mod render;
pub mod sampling;

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::{Point2, Vector3};
use serde::{Deserialize, Serialize};

pub use bvh::{Bvh, Hit, Triangle};
pub use export::{compare_scenes, export_scene, import_scene, SceneDiff, SCENE_FILE, SCHEMA_VERSION};
pub use render::{irradiance_probe, preview_render, PreviewSpec, ProbeResult, ProbeSpec, MIN_PROBE_SAMPLES};

use crate::error::{Error, Result};
use crate::layout::{
    validate_plan, ComponentLibrary, PlacementPlan, PlacementTransform, RoomLayout, RoomLayoutFile,
};
use crate::mesh::{Mesh, MeshPart};
use crate::projection::sample_direction;
use crate::radiance::HdrPanorama;

pub const FLOOR_SLOT: &str = "floor";
pub const WALL_SLOT: &str = "walls";
pub const CEILING_SLOT: &str = "ceiling";
pub const ROOM_OBJECT: &str = "room";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// Linear diffuse reflectance per channel, in `[0, 1]`.
    pub albedo: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specular: Option<f64>,
}

impl Material {
    pub fn diffuse(albedo: [f64; 3]) -> Self {
        Self {
            albedo,
            texture: None,
            specular: None,
        }
    }

    pub fn grey(a: f64) -> Self {
        Self::diffuse([a; 3])
    }

    pub fn validate(&self) -> Result<()> {
        if self.albedo.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::invalid(format!(
                "albedo {:?} outside [0, 1]",
                self.albedo
            )));
        }
        if let Some(s) = self.specular {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::invalid(format!("specular weight {s} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Slot materials used when the caller supplies none.
pub fn default_materials() -> BTreeMap<String, Material> {
    [
        (FLOOR_SLOT, 0.4),
        (WALL_SLOT, 0.7),
        (CEILING_SLOT, 0.8),
        ("cabinet_body", 0.6),
        ("countertop", 0.3),
        ("handles", 0.5),
    ]
    .into_iter()
    .map(|(k, a)| (k.to_string(), Material::grey(a)))
    .collect()
}

const FALLBACK_ALBEDO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Emitter {
    /// Isotropic point source; irradiance at distance `r` is `I cos θ / r²`.
    Point {
        position: [f64; 3],
        intensity_rgb: [f64; 3],
    },
    /// Planar quad emitting `radiance_rgb` from its front side (counter-clockwise winding).
    Area {
        corners: [[f64; 3]; 4],
        radiance_rgb: [f64; 3],
    },
}

impl Emitter {
    pub fn validate(&self) -> Result<()> {
        let (pos, val): (Vec<f64>, [f64; 3]) = match self {
            Emitter::Point {
                position,
                intensity_rgb,
            } => (position.to_vec(), *intensity_rgb),
            Emitter::Area {
                corners,
                radiance_rgb,
            } => (corners.iter().flatten().copied().collect(), *radiance_rgb),
        };
        if pos.iter().any(|v| !v.is_finite()) || val.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!("invalid emitter {self:?}")));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Emitter {
        let s = |v: [f64; 3]| [v[0] * k, v[1] * k, v[2] * k];
        match self {
            Emitter::Point {
                position,
                intensity_rgb,
            } => Emitter::Point {
                position: *position,
                intensity_rgb: s(*intensity_rgb),
            },
            Emitter::Area {
                corners,
                radiance_rgb,
            } => Emitter::Area {
                corners: *corners,
                radiance_rgb: s(*radiance_rgb),
            },
        }
    }
}

/// Distant lighting from a calibrated panorama, rotated counter-clockwise
/// about `+z` by `orientation_deg`.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub panorama: HdrPanorama,
    pub orientation_deg: f64,
}

impl Environment {
    pub fn new(panorama: HdrPanorama, orientation_deg: f64) -> Result<Self> {
        if !panorama.calibration().is_calibrated() {
            return Err(Error::invalid("environment panorama must be calibrated"));
        }
        if !orientation_deg.is_finite() {
            return Err(Error::invalid("environment orientation must be finite"));
        }
        Ok(Self {
            panorama,
            orientation_deg,
        })
    }

    pub fn radiance(&self, dir: &Vector3<f64>) -> [f64; 3] {
        sample_direction(self.panorama.image(), dir, self.orientation_deg.to_radians())
    }
}

/// Rectangular opening in a wall through which the environment is visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Portal {
    pub wall: usize,
    pub corners: [[f64; 3]; 4],
}

/// Geometry stored in a local frame and placed by `transform`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    pub transform: PlacementTransform,
    pub parts: Vec<MeshPart>,
}

impl SceneObject {
    pub fn world_parts(&self) -> Vec<MeshPart> {
        crate::layout::transform_parts(&self.parts, &self.transform)
    }

    pub fn vertex_count(&self) -> usize {
        self.parts.iter().map(|p| p.mesh.vertex_count()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDescription {
    /// Floor plan the scene was built from; probes must lie inside it.
    pub room: Option<RoomLayoutFile>,
    pub objects: Vec<SceneObject>,
    pub materials: BTreeMap<String, Material>,
    pub environment: Environment,
    pub emitters: Vec<Emitter>,
    pub portals: Vec<Portal>,
}

impl SceneDescription {
    /// A scene lit only by the environment, with no geometry.
    pub fn environment_only(environment: Environment) -> Self {
        Self {
            room: None,
            objects: Vec::new(),
            materials: BTreeMap::new(),
            environment,
            emitters: Vec::new(),
            portals: Vec::new(),
        }
    }

    /// Adds world-space geometry under one slot with the given material.
    pub fn add_surface(&mut self, name: &str, slot: &str, mesh: Mesh, material: Material) -> Result<()> {
        material.validate()?;
        self.materials.insert(slot.to_string(), material);
        self.objects.push(SceneObject {
            name: name.to_string(),
            transform: PlacementTransform::IDENTITY,
            parts: vec![MeshPart {
                slot: slot.to_string(),
                mesh,
            }],
        });
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.objects.iter().map(SceneObject::vertex_count).sum()
    }

    pub fn material(&self, slot: &str) -> Material {
        self.materials
            .get(slot)
            .cloned()
            .unwrap_or_else(|| Material::grey(FALLBACK_ALBEDO))
    }

    pub fn set_material(&mut self, slot: &str, material: Material) -> Result<()> {
        material.validate()?;
        self.materials.insert(slot.to_string(), material);
        Ok(())
    }

    /// Same scene with environment pixels and emitters multiplied by `k`.
    pub fn with_scaled_lighting(&self, k: f64) -> Result<Self> {
        let mut out = self.clone();
        out.environment.panorama = crate::radiance::scale_radiance(&self.environment.panorama, k)?;
        out.emitters = self.emitters.iter().map(|e| e.scaled(k)).collect();
        Ok(out)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for m in self.materials.values() {
            m.validate()?;
        }
        for e in &self.emitters {
            e.validate()?;
        }
        if !self.environment.panorama.calibration().is_calibrated() {
            return Err(Error::invalid("environment panorama must be calibrated"));
        }
        Ok(())
    }
}

/// Floor, walls (with window holes) and ceiling of the room, in room
/// coordinates, faces oriented toward the interior.
pub fn room_shell(layout: &RoomLayout) -> Result<(Vec<MeshPart>, Vec<Portal>)> {
    let h = layout.height();
    let corners = layout.corners();
    let flat: Vec<f64> = corners.iter().flat_map(|c| [c.x, c.y]).collect();
    let idx = earcutr::earcut(&flat, &[], 2)
        .map_err(|e| Error::Numeric(format!("floor triangulation failed: {e:?}")))?;
    let mut floor = Mesh {
        positions: corners.iter().map(|c| [c.x, c.y, 0.0]).collect(),
        triangles: Vec::with_capacity(idx.len() / 3),
    };
    for t in idx.chunks_exact(3) {
        let (a, b, c) = (corners[t[0]], corners[t[1]], corners[t[2]]);
        let up = (b - a).perp(&(c - a)) > 0.0;
        let tri = if up { [t[0], t[1], t[2]] } else { [t[0], t[2], t[1]] };
        floor.triangles.push(tri.map(|i| i as u32));
    }
    let ceiling = Mesh {
        positions: corners.iter().map(|c| [c.x, c.y, h]).collect(),
        triangles: floor.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect(),
    };

    let mut walls = Mesh::default();
    let mut portals = Vec::new();
    for wall in layout.walls() {
        let openings: Vec<_> = layout.windows().iter().filter(|w| w.wall == wall.index).collect();
        let mut s_cuts = vec![0.0, wall.length];
        let mut z_cuts = vec![0.0, h];
        for o in &openings {
            s_cuts.extend([o.offset_m, o.offset_m + o.width_m]);
            z_cuts.extend([o.sill_m, o.sill_m + o.height_m]);
            let at = |s: f64, z: f64| {
                let p: Point2<f64> = wall.point_at(s);
                [p.x, p.y, z]
            };
            let (s0, s1, z0, z1) = (o.offset_m, o.offset_m + o.width_m, o.sill_m, o.sill_m + o.height_m);
            portals.push(Portal {
                wall: wall.index,
                corners: [at(s0, z0), at(s0, z1), at(s1, z1), at(s1, z0)],
            });
        }
        for v in [&mut s_cuts, &mut z_cuts] {
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        }
        for si in 0..s_cuts.len() - 1 {
            for zi in 0..z_cuts.len() - 1 {
                let (s0, s1, z0, z1) = (s_cuts[si], s_cuts[si + 1], z_cuts[zi], z_cuts[zi + 1]);
                let (sm, zm) = (0.5 * (s0 + s1), 0.5 * (z0 + z1));
                let open = openings.iter().any(|o| {
                    sm > o.offset_m && sm < o.offset_m + o.width_m && zm > o.sill_m && zm < o.sill_m + o.height_m
                });
                if open {
                    continue;
                }
                let a = wall.point_at(s0);
                let b = wall.point_at(s1);
                walls.append(&Mesh::quad(
                    [a.x, a.y, z0],
                    [a.x, a.y, z1],
                    [b.x, b.y, z1],
                    [b.x, b.y, z0],
                ));
            }
        }
    }
    let parts = vec![
        MeshPart {
            slot: FLOOR_SLOT.into(),
            mesh: floor,
        },
        MeshPart {
            slot: WALL_SLOT.into(),
            mesh: walls,
        },
        MeshPart {
            slot: CEILING_SLOT.into(),
            mesh: ceiling,
        },
    ];
    Ok((parts, portals))
}

/// Room shell plus every planned component, lit by `env` rotated by
/// `orientation_deg`.
pub fn assemble_scene(
    layout: &RoomLayout,
    plan: &PlacementPlan,
    library: &ComponentLibrary,
    env: &HdrPanorama,
    orientation_deg: f64,
    materials: &BTreeMap<String, Material>,
    emitters: &[Emitter],
) -> Result<SceneDescription> {
    let environment = Environment::new(env.clone(), orientation_deg)?;
    let report = validate_plan(plan, layout);
    if !report.is_clean() {
        return Err(Error::invalid(format!(
            "placement plan has violations: {:?}",
            report.violations
        )));
    }
    let (shell, portals) = room_shell(layout)?;
    let mut objects = vec![SceneObject {
        name: ROOM_OBJECT.into(),
        transform: PlacementTransform::IDENTITY,
        parts: shell,
    }];
    for (i, e) in plan.entries.iter().enumerate() {
        let comp = library
            .get(&e.component)
            .ok_or_else(|| Error::invalid(format!("plan references unknown component '{}'", e.component)))?;
        objects.push(SceneObject {
            name: format!("{i:02}_{}", e.component),
            transform: e.transform,
            parts: comp.geometry()?,
        });
    }
    let mut all = default_materials();
    for (k, m) in materials {
        all.insert(k.clone(), m.clone());
    }
    let scene = SceneDescription {
        room: Some(layout.to_file()),
        objects,
        materials: all,
        environment,
        emitters: emitters.to_vec(),
        portals,
    };
    scene.validate()?;
    Ok(scene)
}
