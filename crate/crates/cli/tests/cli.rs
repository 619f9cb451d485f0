mod common;

use std::fs;
use std::process::Command;

use common::{args, calibrated, path_str, sky_pano, uniform_pano, workspace, write_layout, FOUR_METRE_SEQUENCE};
use panostage_cli::app::{run, EXIT_IO, EXIT_OK, EXIT_VALIDATION};
use panostage_core::io::{load_panorama, read_exr, save_linear, write_exr};
use panostage_core::layout::{validate_plan, ComponentLibrary, LayoutType, RoomLayout};
use panostage_core::photometry::{front_fisheye, illuminance_from_fisheye, CalibrationResult};
use panostage_core::projection::{crop_front_hemisphere, equirect_to_orthographic};
use panostage_core::radiance::LUMINOUS_EFFICACY;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_panostage"))
}

#[test]
fn calibrate_passthrough_when_scale_is_already_absolute() {
    let dir = tempfile::tempdir().unwrap();
    let (indoor, outdoor) = (dir.path().join("in.exr"), dir.path().join("out.exr"));
    write_exr(&indoor, &uniform_pano(128, 1.0), None).unwrap();
    write_exr(&outdoor, &sky_pano(128), None).unwrap();
    let lux = std::f64::consts::PI * LUMINOUS_EFFICACY;
    let out = dir.path().join("cal");
    let code = run(args(&[
        "calibrate",
        "--indoor",
        path_str(&indoor),
        "--outdoor",
        path_str(&outdoor),
        "--illuminance",
        &lux.to_string(),
        "--out-dir",
        path_str(&out),
    ]));
    assert_eq!(code, EXIT_OK);
    let result: CalibrationResult =
        serde_json::from_str(&fs::read_to_string(out.join("calibration.json")).unwrap()).unwrap();
    assert!((result.k - 1.0).abs() < 1e-6, "{}", result.k);
    let cal = load_panorama(&out.join("outdoor_calibrated.exr")).unwrap();
    assert_eq!(cal.calibration().factor(), Some(result.k));
}

#[test]
fn calibrate_recovers_inverse_prescale() {
    let dir = tempfile::tempdir().unwrap();
    let s = 2.5f32;
    let (indoor, outdoor) = (dir.path().join("in.exr"), dir.path().join("out.exr"));
    let base = sky_pano(128);
    write_exr(&indoor, &base.scaled(s as f64), None).unwrap();
    write_exr(&outdoor, &base, None).unwrap();
    // illuminance of the unscaled panorama is the reading that makes k = 1 / s
    let lux = illuminance_from_fisheye(&front_fisheye(&calibrated(base), None).unwrap()).unwrap();
    let out = dir.path().join("cal");
    let code = run(args(&[
        "calibrate",
        "--indoor",
        path_str(&indoor),
        "--outdoor",
        path_str(&outdoor),
        "--illuminance",
        &format!("{lux:?}"),
        "--out-dir",
        path_str(&out),
    ]));
    assert_eq!(code, EXIT_OK);
    let result: CalibrationResult =
        serde_json::from_str(&fs::read_to_string(out.join("calibration.json")).unwrap()).unwrap();
    assert!((result.k * s as f64 - 1.0).abs() < 1e-3, "{}", result.k);
}

#[test]
fn missing_illuminance_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("in.exr");
    write_exr(&p, &uniform_pano(32, 1.0), None).unwrap();
    let status = bin()
        .args(["calibrate", "--indoor", path_str(&p), "--outdoor", path_str(&p), "--out-dir"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_VALIDATION));
    assert!(String::from_utf8_lossy(&status.stderr).contains("--illuminance"));
}

#[test]
fn exit_codes_distinguish_io_and_usage() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.exr");
    let out = bin()
        .args(["project", "--mode", "perspective", "--pano", path_str(&missing), "--out"])
        .arg(dir.path().join("x.png"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_IO));
    let out = bin().args(["project", "--mode", "sideways"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&out.stdout).contains("stage"));
}

#[test]
fn fisheye_output_matches_library_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let pano = dir.path().join("p.exr");
    write_exr(&pano, &sky_pano(128), Some(3.0)).unwrap();
    let cli_out = dir.path().join("cli.exr");
    let code = run(args(&[
        "project",
        "--pano",
        path_str(&pano),
        "--mode",
        "fisheye",
        "--side",
        "48",
        "--out",
        path_str(&cli_out),
    ]));
    assert_eq!(code, EXIT_OK);
    let p = load_panorama(&pano).unwrap();
    let lib = equirect_to_orthographic(&crop_front_hemisphere(&p).unwrap(), 48).unwrap();
    let lib_out = dir.path().join("lib.exr");
    save_linear(&lib_out, lib.image(), Some(3.0)).unwrap();
    assert_eq!(fs::read(&cli_out).unwrap(), fs::read(&lib_out).unwrap());
}

#[test]
fn perspective_yaw_is_periodic_and_constant_images_survive() {
    let dir = tempfile::tempdir().unwrap();
    let pano = dir.path().join("p.exr");
    write_exr(&pano, &sky_pano(128), None).unwrap();
    let render = |yaw: &str, name: &str| {
        let out = dir.path().join(name);
        let code = run(args(&[
            "project", "--pano", path_str(&pano), "--mode", "perspective", "--yaw", yaw, "--width", "40",
            "--height", "30", "--out", path_str(&out),
        ]));
        assert_eq!(code, EXIT_OK);
        fs::read(out).unwrap()
    };
    assert_eq!(render("-30", "a.exr"), render("330", "b.exr"));

    let flat = dir.path().join("flat.exr");
    write_exr(&flat, &uniform_pano(64, 0.75), None).unwrap();
    let out = dir.path().join("flat_view.exr");
    let code = run(args(&[
        "project", "--pano", path_str(&flat), "--mode", "perspective", "--pitch", "20", "--out", path_str(&out),
    ]));
    assert_eq!(code, EXIT_OK);
    let (img, _) = read_exr(&out).unwrap();
    assert!(img.pixels().iter().all(|p| *p == [0.75; 3]));
}

fn stage_args<'a>(layout: &'a str, env: &'a str, out: &'a str, sequence: &'a str) -> Vec<String> {
    args(&[
        "stage", "--layout", layout, "--env", env, "--sequence", sequence, "--seed", "7", "--spp", "2", "--width",
        "24", "--height", "16", "--out-dir", out,
    ])
}

#[test]
fn empty_sequence_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(dir.path());
    let out = ws.join("out");
    let code = run(stage_args(
        path_str(&ws.join("layout.json")),
        path_str(&ws.join("environment.exr")),
        path_str(&out),
        "",
    ));
    assert_eq!(code, EXIT_VALIDATION);
    assert!(!out.join("plan.json").exists());
}

#[test]
fn stage_plans_i_l_and_u_kitchens() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(dir.path());
    let rect = [[0.0, 0.0], [4.0, 0.0], [4.0, 3.0], [0.0, 3.0]];
    let cases: [(&[usize], &str, LayoutType); 3] = [
        (&[0], "base_900,base_600,base_760,base_900,base_600", LayoutType::I),
        (&[3, 0], "base_900,base_900,base_900,base_600,base_900,base_900,base_760", LayoutType::L),
        (
            &[3, 0, 1],
            "base_900,base_900,base_900,base_600,base_900,base_900,base_760,base_900,base_760,base_600",
            LayoutType::U,
        ),
    ];
    let library = ComponentLibrary::standard();
    for (walls, seq, expected) in cases {
        let layout_path = dir.path().join(format!("layout_{}.json", walls.len()));
        write_layout(&layout_path, &rect, walls);
        let out = dir.path().join(format!("out_{}", walls.len()));
        let code = run(stage_args(
            path_str(&layout_path),
            path_str(&ws.join("environment.exr")),
            path_str(&out),
            seq,
        ));
        assert_eq!(code, EXIT_OK, "{walls:?}");
        let plan: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("plan.json")).unwrap()).unwrap();
        assert_eq!(plan["layout_type"], serde_json::to_value(expected).unwrap());
        let layout = RoomLayout::load(&layout_path).unwrap();
        let ids: Vec<&str> = seq.split(',').collect();
        let placed = panostage_core::layout::place_components(
            &layout,
            &library.resolve(&ids).unwrap(),
            panostage_core::layout::CornerPolicy::ScaleLast,
        )
        .unwrap();
        assert!(validate_plan(&placed, &layout).is_clean(), "{walls:?}");
        assert!(out.join("scene").join("scene.json").exists());
        assert!(out.join("preview.png").exists() && out.join("preview.exr").exists());
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(dir.path());
    let out_cfg = ws.join("from_config");
    let cfg = ws.join("run.toml");
    fs::write(
        &cfg,
        format!(
            "[stage]\nlayout = {:?}\nenv = {:?}\nsequence = {:?}\nseed = 3\nspp = 1\nwidth = 16\nheight = 12\nout_dir = {:?}\n",
            path_str(&ws.join("layout.json")),
            path_str(&ws.join("environment.exr")),
            FOUR_METRE_SEQUENCE,
            path_str(&out_cfg),
        ),
    )
    .unwrap();
    assert_eq!(run(args(&["--config", path_str(&cfg), "stage"])), EXIT_OK);
    let plan = fs::read_to_string(out_cfg.join("plan.json")).unwrap();
    assert!(plan.contains("\"effective_width_m\": 0.84"), "{plan}");

    let out_flag = ws.join("from_flag");
    let code = run(args(&["--config", path_str(&cfg), "stage", "--policy", "leave-gap", "--out-dir", path_str(&out_flag)]));
    assert_eq!(code, EXIT_OK);
    let plan = fs::read_to_string(out_flag.join("plan.json")).unwrap();
    assert!(plan.contains("LeaveGap"), "{plan}");

    let bad = ws.join("bad.json");
    fs::write(&bad, r#"{"stage": {"colour": "red"}}"#).unwrap();
    assert_eq!(run(args(&["--config", path_str(&bad), "stage"])), EXIT_VALIDATION);
    let bad_section = ws.join("bad_section.toml");
    fs::write(&bad_section, "[paint]\nx = 1\n").unwrap();
    assert_eq!(run(args(&["--config", path_str(&bad_section), "stage"])), EXIT_VALIDATION);
}

#[test]
fn stats_writes_sorted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.csv");
    fs::write(
        &manifest,
        "scene_id,indoor_path,outdoor_path,E_in_lux,E_out_lux,L_tgt_cdm2,orientation_deg,timestamp_iso8601\n\
         b,b_in.exr,b_out.exr,300,9000,40,90,2024-05-01T10:00:00+02:00\n\
         a,a_in.exr,a_out.exr,200,8000,2,0,2024-05-01T11:00:00+02:00\n",
    )
    .unwrap();
    let estimates = dir.path().join("est.csv");
    fs::write(&estimates, "scene_id,L_lowcost_cdm2\na,3\nb,40\n").unwrap();
    let out = dir.path().join("stats.csv");
    let code = run(args(&[
        "stats",
        "--manifest",
        path_str(&manifest),
        "--estimates",
        path_str(&estimates),
        "--skip-file-checks",
        "true",
        "--out",
        path_str(&out),
    ]));
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[1].starts_with("a,200"), "{text}");
    assert!(lines[1].ends_with(",1,50") || lines[1].ends_with(",1.0,50.0"), "{text}");
    assert!(lines[2].starts_with("b,300"), "{text}");
}

#[test]
fn merge_writes_an_uncalibrated_panorama() {
    let dir = tempfile::tempdir().unwrap();
    // linear 8-bit frames: value/exposure is 26/255 in both
    for (level, name) in [(26u8, "f0.png"), (104, "f1.png")] {
        image::RgbImage::from_pixel(32, 16, image::Rgb([level; 3]))
            .save(dir.path().join(name))
            .unwrap();
    }
    let sidecar = dir.path().join("bracket.json");
    fs::write(
        &sidecar,
        r#"{"frames": [{"path": "f0.png", "exposure_s": 1.0}, {"path": "f1.png", "exposure_s": 4.0}]}"#,
    )
    .unwrap();
    let out = dir.path().join("merged.exr");
    let code = run(args(&["merge", "--bracket", path_str(&sidecar), "--out", path_str(&out)]));
    assert_eq!(code, EXIT_OK);
    let p = load_panorama(&out).unwrap();
    assert!(!p.calibration().is_calibrated());
    let expected = 26.0 / 255.0;
    assert!(p.image().pixels().iter().all(|px| (px[0] as f64 - expected).abs() < 1e-6));
}
