use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Point2;
use panostage_core::io::{load_panorama, save_panorama};
use panostage_core::layout::{place_components, validate_plan, ComponentLibrary, CornerPolicy, RoomLayout};
use panostage_core::photometry::calibrate_pair;
use panostage_core::radiance::{HdrPanorama, RgbImage, LUMINOUS_EFFICACY};
use panostage_core::scene::{
    assemble_scene, compare_scenes, export_scene, import_scene, irradiance_probe, Environment, ProbeSpec,
    SceneDescription,
};

fn raw_sky(value: f32) -> HdrPanorama {
    HdrPanorama::new(RgbImage::filled(256, 128, [value; 3]).unwrap()).unwrap()
}

#[test]
fn calibrated_sky_lights_a_probe_with_the_measured_illuminance() {
    // camera counts are 7× too high; a meter reads 1000 lux
    let lux = 1000.0;
    let counts = (7.0 * lux / (PI * LUMINOUS_EFFICACY)) as f32;
    let pair = calibrate_pair(&raw_sky(counts), &raw_sky(counts), lux).unwrap();
    assert!((pair.result.k * 7.0 - 1.0).abs() < 1e-6, "{}", pair.result.k);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("outdoor.exr");
    save_panorama(&path, &pair.outdoor).unwrap();
    let env = load_panorama(&path).unwrap();
    assert_eq!(env.calibration(), pair.outdoor.calibration());

    let scene = SceneDescription::environment_only(Environment::new(env, 0.0).unwrap());
    let spec = ProbeSpec {
        position: [0.0; 3],
        normal: [0.0, 0.0, 1.0],
        samples: 256,
        seed: 1,
        id: 0,
    };
    let e = irradiance_probe(&scene, &spec).unwrap().illuminance_lux;
    assert!((e / lux - 1.0).abs() < 1e-6, "{e}");
}

#[test]
fn staged_kitchen_survives_export_and_import() {
    let mut layout = RoomLayout::new(
        vec![Point2::new(0.0, 0.0), Point2::new(3.6, 0.0), Point2::new(3.6, 3.0), Point2::new(0.0, 3.0)],
        2.5,
    )
    .unwrap();
    layout.set_kitchen_walls(&[0, 1]).unwrap();
    let lib = ComponentLibrary::standard();
    let sequence = ["fridge_600", "base_900", "sink_900", "base_900", "oven_600", "base_900", "base_760"];
    let plan = place_components(&layout, &lib.resolve(&sequence).unwrap(), CornerPolicy::ScaleLast).unwrap();
    assert!(validate_plan(&plan, &layout).is_clean());

    let env = calibrate_pair(&raw_sky(1.0), &raw_sky(1.0), 500.0).unwrap().outdoor;
    let scene = assemble_scene(&layout, &plan, &lib, &env, 30.0, &BTreeMap::new(), &[]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = export_scene(&scene, dir.path()).unwrap();
    assert!(files.iter().all(|f| f.exists()));
    let back = import_scene(dir.path()).unwrap();
    assert!(compare_scenes(&scene, &back).is_clean(1e-12));
    assert_eq!(back.vertex_count(), scene.vertex_count());
}
