//! `scene.json` + OBJ + EXR export and re-import.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Emitter, Environment, Material, Portal, SceneDescription, SceneObject};
use crate::error::{Error, Result};
use crate::io::{read_exr, write_exr};
use crate::layout::{PlacementTransform, RoomLayoutFile};
use crate::mesh::{read_obj, write_obj};
use crate::radiance::{Calibration, HdrPanorama};

pub const SCHEMA_VERSION: u32 = 1;
pub const SCENE_FILE: &str = "scene.json";
const ENV_FILE: &str = "environment.exr";
const MESH_DIR: &str = "meshes";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    room: Option<RoomLayoutFile>,
    objects: Vec<ObjectFile>,
    materials: BTreeMap<String, Material>,
    environment: EnvironmentFile,
    emitters: Vec<Emitter>,
    portals: Vec<Portal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectFile {
    name: String,
    mesh: PathBuf,
    slots: Vec<String>,
    /// Local-to-room matrix, row-major.
    transform: [[f64; 4]; 4],
    placement: PlacementTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentFile {
    file: PathBuf,
    orientation_deg: f64,
    calibration_k: f64,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes the scene under `dir` and returns the written paths.
pub fn export_scene(scene: &SceneDescription, dir: &Path) -> Result<Vec<PathBuf>> {
    scene.validate()?;
    create_dir(&dir.join(MESH_DIR))?;
    let mut written = Vec::new();
    let mut objects = Vec::with_capacity(scene.objects.len());
    for (i, obj) in scene.objects.iter().enumerate() {
        let rel = PathBuf::from(MESH_DIR).join(format!("{i:03}_{}.obj", sanitize(&obj.name)));
        let path = dir.join(&rel);
        write_obj(&path, &obj.parts)?;
        written.push(path);
        objects.push(ObjectFile {
            name: obj.name.clone(),
            mesh: rel,
            slots: obj.parts.iter().map(|p| p.slot.clone()).collect(),
            transform: obj.transform.matrix(),
            placement: obj.transform,
        });
    }
    let k = scene
        .environment
        .panorama
        .calibration()
        .factor()
        .ok_or_else(|| Error::invalid("environment panorama must be calibrated"))?;
    let env_path = dir.join(ENV_FILE);
    write_exr(&env_path, scene.environment.panorama.image(), Some(k))?;
    written.push(env_path);
    let file = SceneFile {
        schema_version: SCHEMA_VERSION,
        room: scene.room.clone(),
        objects,
        materials: scene.materials.clone(),
        environment: EnvironmentFile {
            file: ENV_FILE.into(),
            orientation_deg: scene.environment.orientation_deg,
            calibration_k: k,
        },
        emitters: scene.emitters.clone(),
        portals: scene.portals.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("scene serializes");
    text.push('\n');
    let path = dir.join(SCENE_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

pub fn import_scene(dir: &Path) -> Result<SceneDescription> {
    let path = dir.join(SCENE_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let file: SceneFile = serde_json::from_str(&text).map_err(|e| Error::format(&path, e))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::format(
            &path,
            format!("unsupported schema_version {}", file.schema_version),
        ));
    }
    let mut objects = Vec::with_capacity(file.objects.len());
    for o in &file.objects {
        let parts = read_obj(&dir.join(&o.mesh))?;
        objects.push(SceneObject {
            name: o.name.clone(),
            transform: o.placement,
            parts,
        });
    }
    let env_path = dir.join(&file.environment.file);
    let (image, stored_k) = read_exr(&env_path)?;
    let k = stored_k.unwrap_or(file.environment.calibration_k);
    let panorama = HdrPanorama::with_calibration(image, Calibration::Calibrated(k))?;
    let scene = SceneDescription {
        room: file.room,
        objects,
        materials: file.materials,
        environment: Environment::new(panorama, file.environment.orientation_deg)?,
        emitters: file.emitters,
        portals: file.portals,
    };
    scene.validate()?;
    Ok(scene)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SceneDiff {
    pub max_vertex_diff_m: f64,
    pub issues: Vec<String>,
}

impl SceneDiff {
    pub fn is_clean(&self, tolerance_m: f64) -> bool {
        self.issues.is_empty() && self.max_vertex_diff_m < tolerance_m
    }
}

/// Structural comparison with the largest world-space vertex displacement.
pub fn compare_scenes(a: &SceneDescription, b: &SceneDescription) -> SceneDiff {
    let mut diff = SceneDiff::default();
    if a.objects.len() != b.objects.len() {
        diff.issues.push(format!("object count {} vs {}", a.objects.len(), b.objects.len()));
    }
    for (oa, ob) in a.objects.iter().zip(&b.objects) {
        if oa.name != ob.name {
            diff.issues.push(format!("object name '{}' vs '{}'", oa.name, ob.name));
        }
        let (wa, wb) = (oa.world_parts(), ob.world_parts());
        if wa.len() != wb.len() {
            diff.issues.push(format!("'{}': part count differs", oa.name));
        }
        for (pa, pb) in wa.iter().zip(&wb) {
            if pa.slot != pb.slot || pa.mesh.triangles != pb.mesh.triangles {
                diff.issues.push(format!("'{}': part '{}' topology differs", oa.name, pa.slot));
                continue;
            }
            if pa.mesh.positions.len() != pb.mesh.positions.len() {
                diff.issues.push(format!("'{}': part '{}' vertex count differs", oa.name, pa.slot));
                continue;
            }
            for (va, vb) in pa.mesh.positions.iter().zip(&pb.mesh.positions) {
                for k in 0..3 {
                    diff.max_vertex_diff_m = diff.max_vertex_diff_m.max((va[k] - vb[k]).abs());
                }
            }
        }
    }
    if a.materials != b.materials {
        diff.issues.push("materials differ".into());
    }
    if a.emitters != b.emitters {
        diff.issues.push("emitters differ".into());
    }
    if a.portals != b.portals {
        diff.issues.push("portals differ".into());
    }
    if a.room != b.room {
        diff.issues.push("room layout differs".into());
    }
    if a.environment != b.environment {
        diff.issues.push("environment differs".into());
    }
    diff
}
