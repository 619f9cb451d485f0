use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{read_obj, Mesh, MeshPart};

const COUNTERTOP_THICKNESS: f64 = 0.04;
const HANDLE_PROTRUSION: f64 = 0.025;
const ANCHOR_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Refrigerator,
    Cabinet,
    Oven,
    Sink,
    Dishwasher,
    TallCabinet,
}

impl Category {
    fn has_countertop(self) -> bool {
        !matches!(self, Category::Refrigerator | Category::TallCabinet)
    }
}

/// Per-component metadata as stored next to the meshes of a library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub id: String,
    pub category: Category,
    pub width_m: f64,
    pub depth_m: f64,
    pub height_m: f64,
    /// OBJ path relative to the metadata file; procedural box geometry when absent.
    #[serde(default)]
    pub mesh: Option<PathBuf>,
    /// Back-bottom-center of the bounding box in mesh coordinates.
    #[serde(default)]
    pub anchor_m: Option<[f64; 3]>,
    #[serde(default)]
    pub material_slots: Vec<String>,
}

/// A placeable unit. Local frame: origin at the back-bottom-center, `+x`
/// along the width, `+y` from the back face toward the front, `+z` up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KitchenComponent {
    pub id: String,
    pub category: Category,
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    pub mesh: Option<PathBuf>,
    pub anchor: [f64; 3],
    pub material_slots: Vec<String>,
}

impl KitchenComponent {
    pub fn procedural(id: &str, category: Category, width: f64, depth: f64, height: f64) -> Result<Self> {
        let mut c = Self {
            id: id.to_string(),
            category,
            width,
            depth,
            height,
            mesh: None,
            anchor: [0.0; 3],
            material_slots: Vec::new(),
        };
        c.material_slots = c.procedural_parts().into_iter().map(|p| p.slot).collect();
        c.validate()?;
        Ok(c)
    }

    pub fn from_spec(spec: &ComponentSpec, base_dir: &Path) -> Result<Self> {
        let mut c = Self {
            id: spec.id.clone(),
            category: spec.category,
            width: spec.width_m,
            depth: spec.depth_m,
            height: spec.height_m,
            mesh: spec.mesh.as_ref().map(|m| base_dir.join(m)),
            anchor: spec.anchor_m.unwrap_or([0.0; 3]),
            material_slots: spec.material_slots.clone(),
        };
        if c.material_slots.is_empty() && c.mesh.is_none() {
            c.material_slots = c.procedural_parts().into_iter().map(|p| p.slot).collect();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("width", self.width), ("depth", self.depth), ("height", self.height)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "component '{}': {name} must be > 0, got {v}",
                    self.id
                )));
            }
        }
        if self.id.is_empty() {
            return Err(Error::invalid("component id is empty"));
        }
        Ok(())
    }

    /// Geometry in the local frame, one part per material slot.
    pub fn geometry(&self) -> Result<Vec<MeshPart>> {
        let Some(path) = &self.mesh else {
            return Ok(self.procedural_parts());
        };
        let parts = read_obj(path)?;
        let (lo, _) = crate::mesh::parts_bounds(&parts)
            .ok_or_else(|| Error::format(path, "mesh has no vertices"))?;
        if (lo[1] - self.anchor[1]).abs() > ANCHOR_TOLERANCE {
            return Err(Error::invalid(format!(
                "component '{}': anchor y = {} is not on the bounding-box back plane (y = {})",
                self.id, self.anchor[1], lo[1]
            )));
        }
        let a = self.anchor;
        Ok(parts
            .into_iter()
            .map(|p| MeshPart {
                slot: p.slot,
                mesh: p.mesh.map_positions(|v| [v[0] - a[0], v[1] - a[1], v[2] - a[2]]),
            })
            .collect())
    }

    fn procedural_parts(&self) -> Vec<MeshPart> {
        let (hw, d, h) = (self.width / 2.0, self.depth, self.height);
        let body_d = d - HANDLE_PROTRUSION.min(d / 4.0);
        let mut parts = Vec::new();
        let body_top = if self.category.has_countertop() {
            (h - COUNTERTOP_THICKNESS).max(h / 2.0)
        } else {
            h
        };
        parts.push(MeshPart {
            slot: "cabinet_body".into(),
            mesh: Mesh::cuboid([-hw, 0.0, 0.0], [hw, body_d, body_top]),
        });
        if self.category.has_countertop() {
            parts.push(MeshPart {
                slot: "countertop".into(),
                mesh: Mesh::cuboid([-hw, 0.0, body_top], [hw, d, h]),
            });
        }
        let handle_w = (0.5 * self.width).min(0.3);
        let handle_z = body_top - 0.1f64.min(body_top / 4.0);
        parts.push(MeshPart {
            slot: "handles".into(),
            mesh: Mesh::cuboid(
                [-handle_w / 2.0, body_d, handle_z - 0.01],
                [handle_w / 2.0, d, handle_z + 0.01],
            ),
        });
        parts
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComponentLibrary {
    components: BTreeMap<String, KitchenComponent>,
}

impl ComponentLibrary {
    pub fn new(components: impl IntoIterator<Item = KitchenComponent>) -> Result<Self> {
        let mut lib = Self::default();
        for c in components {
            lib.insert(c)?;
        }
        Ok(lib)
    }

    /// A small set of procedural units with common base-unit widths.
    pub fn standard() -> Self {
        let items = [
            ("base_600", Category::Cabinet, 0.6, 0.6, 0.9),
            ("base_760", Category::Cabinet, 0.76, 0.6, 0.9),
            ("base_900", Category::Cabinet, 0.9, 0.6, 0.9),
            ("sink_900", Category::Sink, 0.9, 0.6, 0.9),
            ("oven_600", Category::Oven, 0.6, 0.6, 0.9),
            ("dishwasher_600", Category::Dishwasher, 0.6, 0.6, 0.9),
            ("fridge_600", Category::Refrigerator, 0.6, 0.65, 1.8),
            ("tall_600", Category::TallCabinet, 0.6, 0.6, 2.1),
        ];
        Self::new(items.into_iter().map(|(id, cat, w, d, h)| {
            KitchenComponent::procedural(id, cat, w, d, h).expect("valid built-in component")
        }))
        .expect("unique built-in ids")
    }

    pub fn insert(&mut self, c: KitchenComponent) -> Result<()> {
        c.validate()?;
        if self.components.contains_key(&c.id) {
            return Err(Error::invalid(format!("duplicate component id '{}'", c.id)));
        }
        self.components.insert(c.id.clone(), c);
        Ok(())
    }

    /// Reads every `*.json` metadata file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")))
            .collect();
        paths.sort();
        let mut lib = Self::default();
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let spec: ComponentSpec = serde_json::from_str(&text).map_err(|e| Error::format(&p, e))?;
            lib.insert(KitchenComponent::from_spec(&spec, dir)?)?;
        }
        if lib.components.is_empty() {
            return Err(Error::invalid(format!(
                "no component metadata found in {}",
                dir.display()
            )));
        }
        Ok(lib)
    }

    pub fn get(&self, id: &str) -> Option<&KitchenComponent> {
        self.components.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.components.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Components for a user sequence of ids, in that order.
    pub fn resolve<S: AsRef<str>>(&self, sequence: &[S]) -> Result<Vec<KitchenComponent>> {
        sequence
            .iter()
            .map(|id| {
                let id = id.as_ref();
                self.get(id)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("unknown component id '{id}'")))
            })
            .collect()
    }
}
