//! Subcommand implementations shared by the binary, the HTTP service and tests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use panostage_core::dataset::{dataset_stats, load_manifest, ManifestOptions};
use panostage_core::io::{load_bracket, load_panorama, save_linear, save_panorama, tonemap_png, write_exr};
use panostage_core::layout::{
    place_components, plan_json, select_kitchen_walls, ComponentLibrary, CornerPolicy, KitchenMask,
    PlacementPlan, RoomLayout, WallSelection,
};
use panostage_core::merge::merge_brackets;
use panostage_core::photometry::{calibrate_pair_with_side, write_stats_csv};
use panostage_core::projection::{crop_front_hemisphere, equirect_to_orthographic, pano_to_perspective, PerspectiveView};
use panostage_core::radiance::{HdrPanorama, RgbImage};
use panostage_core::scene::{assemble_scene, export_scene, preview_render, Emitter, Material, PreviewSpec, SceneDescription};
use panostage_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::require;

pub const DEFAULT_CAMERA_HEIGHT_M: f64 = 1.4;
pub const DEFAULT_SPP: usize = 16;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateArgs {
    /// Indoor equirectangular panorama (.exr or .hdr).
    #[arg(long)]
    pub indoor: Option<PathBuf>,
    /// Outdoor panorama captured right after the indoor one.
    #[arg(long)]
    pub outdoor: Option<PathBuf>,
    /// Illuminance measured at the camera, facing the lens axis (lux).
    #[arg(long, value_name = "LUX")]
    pub illuminance: Option<f64>,
    /// Fisheye side used for integration (default: panorama height).
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn run_calibrate(args: &CalibrateArgs) -> Result<()> {
    let indoor = load_panorama(&require(&args.indoor, "indoor")?)?;
    let outdoor = load_panorama(&require(&args.outdoor, "outdoor")?)?;
    let lux = require(&args.illuminance, "illuminance")?;
    let out = require(&args.out_dir, "out-dir")?;
    let pair = calibrate_pair_with_side(&indoor, &outdoor, lux, args.side)?;
    create_dir(&out)?;
    save_panorama(&out.join("indoor_calibrated.exr"), &pair.indoor)?;
    save_panorama(&out.join("outdoor_calibrated.exr"), &pair.outdoor)?;
    let mut json = serde_json::to_string_pretty(&pair.result).expect("result serializes");
    json.push('\n');
    write_file(&out.join("calibration.json"), json)?;
    println!("k = {:e}", pair.result.k);
    Ok(())
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeArgs {
    /// JSON sidecar listing bracket frames and exposure times.
    #[arg(long)]
    pub bracket: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_merge(args: &MergeArgs) -> Result<()> {
    let bracket = load_bracket(&require(&args.bracket, "bracket")?)?;
    let pano = merge_brackets(&bracket)?;
    save_panorama(&require(&args.out, "out")?, &pano)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    Fisheye,
    Perspective,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectArgs {
    #[arg(long)]
    pub pano: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ProjectionMode>,
    /// Fisheye side in pixels (default: panorama height).
    #[arg(long)]
    pub side: Option<usize>,
    /// Horizontal field of view, degrees.
    #[arg(long)]
    pub fov: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub yaw: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub pitch: Option<f64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Output image (.exr, .hdr or tone-mapped .png).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn project_image(pano: &HdrPanorama, args: &ProjectArgs) -> Result<RgbImage> {
    match require(&args.mode, "mode")? {
        ProjectionMode::Fisheye => {
            let half = crop_front_hemisphere(pano)?;
            let side = args.side.unwrap_or(pano.height());
            Ok(equirect_to_orthographic(&half, side)?.image().clone())
        }
        ProjectionMode::Perspective => pano_to_perspective(
            pano,
            &PerspectiveView {
                fov_deg: args.fov.unwrap_or(90.0),
                yaw_deg: args.yaw.unwrap_or(0.0),
                pitch_deg: args.pitch.unwrap_or(0.0),
                width: args.width.unwrap_or(640),
                height: args.height.unwrap_or(480),
            },
        ),
    }
}

pub fn run_project(args: &ProjectArgs) -> Result<()> {
    let pano = load_panorama(&require(&args.pano, "pano")?)?;
    let img = project_image(&pano, args)?;
    save_linear(&require(&args.out, "out")?, &img, pano.calibration().factor())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    #[default]
    #[serde(alias = "ScaleLast")]
    ScaleLast,
    #[serde(alias = "LeaveGap")]
    LeaveGap,
}

impl From<PolicyArg> for CornerPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::ScaleLast => CornerPolicy::ScaleLast,
            PolicyArg::LeaveGap => CornerPolicy::LeaveGap,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageArgs {
    /// Room layout JSON.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Kitchen mask (1×w PNG or run-length JSON); overrides the layout's kitchen walls.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Directory of component metadata (default: built-in procedural units).
    #[arg(long)]
    pub components: Option<PathBuf>,
    /// Comma-separated component ids in placement order.
    #[arg(long, value_delimiter = ',')]
    pub sequence: Option<Vec<String>>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// Calibrated outdoor panorama used as environment lighting.
    #[arg(long)]
    pub env: Option<PathBuf>,
    /// Room orientation, degrees counter-clockwise.
    #[arg(long, allow_hyphen_values = true)]
    pub orientation: Option<f64>,
    /// Slot → material JSON object.
    #[arg(long)]
    pub materials: Option<PathBuf>,
    /// JSON list of emitters.
    #[arg(long)]
    pub emitters: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub spp: Option<usize>,
    #[arg(long)]
    pub fov: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub yaw: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub pitch: Option<f64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Preview camera height above the floor, meters.
    #[arg(long)]
    pub camera_height: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Inputs resolved from files, shared by `stage` and the HTTP service.
#[derive(Debug, Clone)]
pub struct StageInputs {
    pub layout: RoomLayout,
    pub library: ComponentLibrary,
    pub env: HdrPanorama,
    pub orientation_deg: f64,
    pub materials: BTreeMap<String, Material>,
    pub emitters: Vec<Emitter>,
}

pub fn load_layout(path: &Path, mask: Option<&Path>) -> Result<RoomLayout> {
    let layout = RoomLayout::load(path)?;
    match mask {
        Some(m) => select_kitchen_walls(&layout, &KitchenMask::load(m)?, &WallSelection::default()),
        None => Ok(layout),
    }
}

pub fn load_library(dir: Option<&Path>) -> Result<ComponentLibrary> {
    match dir {
        Some(d) => ComponentLibrary::load_dir(d),
        None => Ok(ComponentLibrary::standard()),
    }
}

pub fn load_materials(path: Option<&Path>) -> Result<BTreeMap<String, Material>> {
    let Some(p) = path else { return Ok(BTreeMap::new()) };
    let m: BTreeMap<String, Material> = read_json(p)?;
    for v in m.values() {
        v.validate()?;
    }
    Ok(m)
}

pub fn load_emitters(path: Option<&Path>) -> Result<Vec<Emitter>> {
    let Some(p) = path else { return Ok(Vec::new()) };
    let e: Vec<Emitter> = read_json(p)?;
    for v in &e {
        v.validate()?;
    }
    Ok(e)
}

/// Plan for a sequence of component ids.
pub fn plan_sequence<S: AsRef<str>>(
    layout: &RoomLayout,
    library: &ComponentLibrary,
    sequence: &[S],
    policy: CornerPolicy,
) -> Result<PlacementPlan> {
    if sequence.is_empty() {
        return Err(Error::EmptySequence);
    }
    place_components(layout, &library.resolve(sequence)?, policy)
}

pub fn default_camera(layout: &RoomLayout, height: f64) -> [f64; 3] {
    let c = layout.camera();
    [c.x, c.y, height.min(layout.height())]
}

pub fn build_scene(inputs: &StageInputs, plan: &PlacementPlan) -> Result<SceneDescription> {
    assemble_scene(
        &inputs.layout,
        plan,
        &inputs.library,
        &inputs.env,
        inputs.orientation_deg,
        &inputs.materials,
        &inputs.emitters,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutputs {
    pub plan: PlacementPlan,
    pub plan_json: String,
    pub preview: RgbImage,
    pub files: Vec<PathBuf>,
}

pub fn run_stage(args: &StageArgs) -> Result<StageOutputs> {
    let layout = load_layout(&require(&args.layout, "layout")?, args.mask.as_deref())?;
    let env = load_panorama(&require(&args.env, "env")?)?;
    let inputs = StageInputs {
        library: load_library(args.components.as_deref())?,
        env,
        orientation_deg: args.orientation.unwrap_or(0.0),
        materials: load_materials(args.materials.as_deref())?,
        emitters: load_emitters(args.emitters.as_deref())?,
        layout,
    };
    let out = require(&args.out_dir, "out-dir")?;
    let sequence = args.sequence.clone().unwrap_or_default();
    let plan = plan_sequence(&inputs.layout, &inputs.library, &sequence, args.policy.unwrap_or_default().into())?;
    let scene = build_scene(&inputs, &plan)?;
    let spec = PreviewSpec {
        view: PerspectiveView {
            fov_deg: args.fov.unwrap_or(90.0),
            yaw_deg: args.yaw.unwrap_or(0.0),
            pitch_deg: args.pitch.unwrap_or(0.0),
            width: args.width.unwrap_or(320),
            height: args.height.unwrap_or(240),
        },
        position: default_camera(&inputs.layout, args.camera_height.unwrap_or(DEFAULT_CAMERA_HEIGHT_M)),
        spp: args.spp.unwrap_or(DEFAULT_SPP),
        seed: args.seed.unwrap_or(0),
    };
    let preview = preview_render(&scene, &spec)?;

    create_dir(&out)?;
    let text = plan_json(&plan);
    let plan_path = out.join("plan.json");
    write_file(&plan_path, &text)?;
    let mut files = vec![plan_path];
    files.extend(export_scene(&scene, &out.join("scene"))?);
    let exr = out.join("preview.exr");
    write_exr(&exr, &preview, None)?;
    let png = out.join("preview.png");
    write_file(&png, tonemap_png(&preview)?)?;
    files.extend([exr, png]);
    Ok(StageOutputs {
        plan,
        plan_json: text,
        preview,
        files,
    })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsArgs {
    /// Dataset manifest (CSV or JSON).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// CSV with columns scene_id,L_lowcost_cdm2.
    #[arg(long)]
    pub estimates: Option<PathBuf>,
    /// Skip checking that panorama files exist.
    #[arg(long)]
    pub skip_file_checks: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct EstimateRow {
    scene_id: String,
    #[serde(rename = "L_lowcost_cdm2")]
    l_lowcost_cdm2: f64,
}

pub fn run_stats(args: &StatsArgs) -> Result<()> {
    let opts = ManifestOptions {
        check_files: !args.skip_file_checks.unwrap_or(false),
        ..Default::default()
    };
    let manifest = load_manifest(&require(&args.manifest, "manifest")?, &opts)?;
    for d in &manifest.diagnostics {
        eprintln!("row {}: {}", d.row, d.reason);
    }
    let est_path = require(&args.estimates, "estimates")?;
    let mut rdr = csv::Reader::from_path(&est_path).map_err(|e| Error::format(&est_path, e))?;
    let mut estimates = BTreeMap::new();
    for row in rdr.deserialize() {
        let r: EstimateRow = row.map_err(|e| Error::format(&est_path, e))?;
        estimates.insert(r.scene_id, r.l_lowcost_cdm2);
    }
    let stats = dataset_stats(&manifest.entries, &estimates)?;
    let out = require(&args.out, "out")?;
    let file = fs::File::create(&out).map_err(|e| Error::io(&out, e))?;
    write_stats_csv(&stats.rows, file)?;
    println!(
        "{} scenes, mean |error| = {:.4} cd/m², mean error = {}",
        stats.rows.len(),
        stats.summary.mean_abs_error_cdm2,
        stats
            .summary
            .mean_pct_error
            .map_or("n/a".to_string(), |p| format!("{p:.2}%"))
    );
    Ok(())
}
