//! Illuminance from an orthographic fisheye, calibration factor and the
//! paired indoor/outdoor calibration pipeline.
//!
//! Under the orthographic mapping `r = sin θ` the image-plane area element is
//! `sin θ cos θ dθ dφ`, so the hemispherical illuminance integral reduces to
//! `π` times the mean luminance over the unit disk.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::projection::{
    crop_front_hemisphere, equirect_to_orthographic, pixel_to_dir, OrthographicFisheye,
    SphericalDirection,
};
use crate::radiance::{luminance_map, scale_radiance, HdrPanorama};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotometricRecord {
    pub indoor_illuminance_lux: f64,
    pub outdoor_illuminance_lux: f64,
    pub target_luminance_cdm2: f64,
    pub orientation_deg: f64,
}

impl PhotometricRecord {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("indoor illuminance", self.indoor_illuminance_lux),
            ("outdoor illuminance", self.outdoor_illuminance_lux),
            ("target luminance", self.target_luminance_cdm2),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be ≥ 0, got {v}")));
            }
        }
        if !(0.0..360.0).contains(&self.orientation_deg) {
            return Err(Error::invalid(format!(
                "orientation must lie in [0, 360), got {}",
                self.orientation_deg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub k: f64,
    pub uniform_luminance_cdm2: f64,
    pub mean_disk_luminance: f64,
    pub illuminance_lux: f64,
}

/// Mean luminance over valid disk pixels, reduced row by row in a fixed order.
pub fn mean_disk_luminance(f: &OrthographicFisheye) -> Result<f64> {
    if f.valid_count() == 0 {
        return Err(Error::NoValidPixels);
    }
    let lum = luminance_map(f)?;
    let side = f.side();
    let rows: Vec<CompensatedSum> = (0..side)
        .into_par_iter()
        .map(|row| {
            let mut acc = CompensatedSum::new();
            for col in 0..side {
                if f.is_valid(col, row) {
                    acc.add(lum.get(col, row));
                }
            }
            acc
        })
        .collect();
    let mut total = CompensatedSum::new();
    for r in &rows {
        total.merge(r);
    }
    Ok(total.value() / f.valid_count() as f64)
}

/// `E = π · mean disk luminance`, lux.
pub fn illuminance_from_fisheye(f: &OrthographicFisheye) -> Result<f64> {
    Ok(PI * mean_disk_luminance(f)?)
}

/// `L = E / π`.
pub fn uniform_luminance(illuminance_lux: f64) -> Result<f64> {
    if !(illuminance_lux.is_finite() && illuminance_lux >= 0.0) {
        return Err(Error::invalid(format!(
            "illuminance must be ≥ 0, got {illuminance_lux}"
        )));
    }
    Ok(illuminance_lux / PI)
}

pub fn calibration_factor(
    measured_lux: f64,
    f: &OrthographicFisheye,
) -> Result<CalibrationResult> {
    if !(measured_lux.is_finite() && measured_lux > 0.0) {
        return Err(Error::invalid(format!(
            "measured illuminance must be > 0, got {measured_lux}"
        )));
    }
    let uniform = uniform_luminance(measured_lux)?;
    let mean = mean_disk_luminance(f)?;
    if mean.is_nan() || mean <= 0.0 {
        return Err(Error::UnusableExposure(mean));
    }
    let k = uniform / mean;
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Numeric(format!("calibration factor {k} is not usable")));
    }
    Ok(CalibrationResult {
        k,
        uniform_luminance_cdm2: uniform,
        mean_disk_luminance: mean,
        illuminance_lux: measured_lux,
    })
}

/// Front-lens orthographic fisheye of a panorama; `side` defaults to `h`.
pub fn front_fisheye(pano: &HdrPanorama, side: Option<usize>) -> Result<OrthographicFisheye> {
    let half = crop_front_hemisphere(pano)?;
    equirect_to_orthographic(&half, side.unwrap_or(pano.height()))
}

#[derive(Debug, Clone)]
pub struct CalibratedPair {
    pub indoor: HdrPanorama,
    pub outdoor: HdrPanorama,
    pub result: CalibrationResult,
}

/// Calibrates the indoor panorama from a front-facing illuminance reading and
/// transfers the same factor to the outdoor panorama.
pub fn calibrate_pair(
    indoor: &HdrPanorama,
    outdoor: &HdrPanorama,
    measured_lux: f64,
) -> Result<CalibratedPair> {
    calibrate_pair_with_side(indoor, outdoor, measured_lux, None)
}

pub fn calibrate_pair_with_side(
    indoor: &HdrPanorama,
    outdoor: &HdrPanorama,
    measured_lux: f64,
    side: Option<usize>,
) -> Result<CalibratedPair> {
    let fisheye = front_fisheye(indoor, side)?;
    let result = calibration_factor(measured_lux, &fisheye)?;
    Ok(CalibratedPair {
        indoor: scale_radiance(indoor, result.k)?,
        outdoor: scale_radiance(outdoor, result.k)?,
        result,
    })
}

/// Mean luminance of panorama pixels whose center lies within `radius` radians
/// of `center`, e.g. a whiteboard patch.
pub fn region_luminance(
    pano: &HdrPanorama,
    center: SphericalDirection,
    radius: f64,
) -> Result<f64> {
    let lum = luminance_map(pano)?;
    let (w, h) = (pano.width(), pano.height());
    let mut acc = CompensatedSum::new();
    let mut n = 0usize;
    for y in 0..h {
        for x in 0..w {
            let d = pixel_to_dir(x as f64 + 0.5, y as f64 + 0.5, w, h);
            if center.angle_to(d) <= radius {
                acc.add(lum.get(x, y));
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::invalid(format!(
            "region of radius {radius} rad contains no pixel centers"
        )));
    }
    Ok(acc.value() / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneError {
    pub estimate_cdm2: f64,
    pub target_cdm2: f64,
    pub abs_error_cdm2: f64,
    /// `None` when the target luminance is zero.
    pub pct_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub per_scene: Vec<SceneError>,
    pub mean_abs_error_cdm2: f64,
    pub mean_pct_error: Option<f64>,
}

pub fn scene_error(estimate: f64, target: f64) -> SceneError {
    let abs = (estimate - target).abs();
    SceneError {
        estimate_cdm2: estimate,
        target_cdm2: target,
        abs_error_cdm2: abs,
        pct_error: (target > 0.0).then(|| 100.0 * abs / target),
    }
}

/// Sums in ascending order so the aggregate does not depend on input order.
fn order_free_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values.into_iter().collect::<CompensatedSum>().value() / n
}

/// Per-scene and aggregate errors of `(estimate, target)` luminance pairs.
pub fn error_stats(pairs: &[(f64, f64)]) -> Result<ErrorStats> {
    if pairs.is_empty() {
        return Err(Error::invalid("no luminance pairs to compare"));
    }
    if let Some((e, t)) = pairs
        .iter()
        .find(|(e, t)| !(e.is_finite() && t.is_finite() && *t >= 0.0))
    {
        return Err(Error::invalid(format!("invalid luminance pair ({e}, {t})")));
    }
    let per_scene: Vec<SceneError> = pairs.iter().map(|(e, t)| scene_error(*e, *t)).collect();
    let mean_abs = order_free_mean(per_scene.iter().map(|s| s.abs_error_cdm2).collect());
    let pcts: Vec<f64> = per_scene.iter().filter_map(|s| s.pct_error).collect();
    let mean_pct = (!pcts.is_empty()).then(|| order_free_mean(pcts));
    Ok(ErrorStats {
        per_scene,
        mean_abs_error_cdm2: mean_abs,
        mean_pct_error: mean_pct,
    })
}

/// One line of the exported stats table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub scene_id: String,
    #[serde(rename = "E_measured_lux")]
    pub e_measured_lux: f64,
    #[serde(rename = "L_std_cdm2")]
    pub l_std_cdm2: f64,
    #[serde(rename = "L_lowcost_cdm2")]
    pub l_lowcost_cdm2: f64,
    pub abs_err_cdm2: f64,
    pub pct_err: Option<f64>,
}

impl StatsRow {
    pub fn new(scene_id: impl Into<String>, measured_lux: f64, standard: f64, low_cost: f64) -> Self {
        let err = scene_error(low_cost, standard);
        Self {
            scene_id: scene_id.into(),
            e_measured_lux: measured_lux,
            l_std_cdm2: standard,
            l_lowcost_cdm2: low_cost,
            abs_err_cdm2: err.abs_error_cdm2,
            pct_err: err.pct_error,
        }
    }
}

pub fn write_stats_csv<W: Write>(rows: &[StatsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::format("<stats csv>", e))?;
    }
    w.flush().map_err(|e| Error::io("<stats csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radiance::{Calibration, RgbImage};

    /// Grey level whose luminance is `l` cd/m².
    fn grey(l: f64) -> [f32; 3] {
        [(l / 179.0) as f32; 3]
    }

    fn uniform_fisheye(side: usize, l: f64) -> OrthographicFisheye {
        OrthographicFisheye::from_disk_fn(side, |_, _| grey(l)).unwrap()
    }

    #[test]
    fn uniform_disk_gives_pi_l() {
        let e = illuminance_from_fisheye(&uniform_fisheye(1024, 100.0)).unwrap();
        assert!((e - 100.0 * PI).abs() / (100.0 * PI) < 5e-3);
        let zero = illuminance_from_fisheye(&uniform_fisheye(64, 0.0)).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn inner_cap_matches_quadrature() {
        // oracle: midpoint quadrature of L sinθ cosθ over θ < 30°, L = 100
        let n = 200_000;
        let dt = (PI / 6.0) / n as f64;
        let cap: f64 = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * dt;
                100.0 * t.sin() * t.cos() * dt
            })
            .sum::<f64>()
            * 2.0
            * PI;
        assert!((cap - 25.0 * PI).abs() < 1e-6);

        let f = OrthographicFisheye::from_disk_fn(1024, |x, y| {
            if x * x + y * y < 0.25 {
                grey(100.0)
            } else {
                [0.0; 3]
            }
        })
        .unwrap();
        let e = illuminance_from_fisheye(&f).unwrap();
        assert!((e - cap).abs() / cap < 2e-3, "{e} vs {cap}");
    }

    #[test]
    fn uniform_luminance_examples() {
        assert!((uniform_luminance(PI).unwrap() - 1.0).abs() < 1e-15);
        assert!((uniform_luminance(314.159).unwrap() - 100.0).abs() < 1e-3);
        assert_eq!(uniform_luminance(0.0).unwrap(), 0.0);
        assert!(uniform_luminance(-1.0).is_err());
    }

    #[test]
    fn factor_examples() {
        let f = uniform_fisheye(128, 50.0);
        let r = calibration_factor(100.0 * PI, &f).unwrap();
        assert!((r.uniform_luminance_cdm2 - 100.0).abs() < 1e-9);
        assert!((r.k - 2.0).abs() < 1e-6);

        let mean = mean_disk_luminance(&f).unwrap();
        let r = calibration_factor(PI * mean, &f).unwrap();
        assert!((r.k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn black_capture_is_unusable() {
        let f = uniform_fisheye(32, 0.0);
        assert!(matches!(
            calibration_factor(10.0, &f),
            Err(Error::UnusableExposure(_))
        ));
        let f = uniform_fisheye(32, 10.0);
        assert!(calibration_factor(0.0, &f).is_err());
        assert!(calibration_factor(f64::NAN, &f).is_err());
    }

    #[test]
    fn pair_uses_indoor_factor_for_outdoor() {
        let indoor =
            HdrPanorama::new(RgbImage::filled(128, 64, grey(25.0)).unwrap()).unwrap();
        let outdoor =
            HdrPanorama::new(RgbImage::filled(128, 64, [2.0, 3.0, 4.0]).unwrap()).unwrap();
        let fisheye = front_fisheye(&indoor, None).unwrap();
        let e_true = 2.0 * illuminance_from_fisheye(&fisheye).unwrap();
        let pair = calibrate_pair(&indoor, &outdoor, e_true).unwrap();
        assert!((pair.result.k - 2.0).abs() < 1e-9);
        assert_eq!(pair.indoor.calibration(), Calibration::Calibrated(pair.result.k));
        assert_eq!(pair.outdoor.calibration(), Calibration::Calibrated(pair.result.k));
        assert!((pair.outdoor.image().get(0, 0)[2] - 8.0).abs() < 1e-5);
    }

    #[test]
    fn unit_factor_passes_pixels_through() {
        let indoor = HdrPanorama::new(
            RgbImage::from_fn(64, 32, |x, y| [x as f32 * 0.01, y as f32 * 0.02, 0.3]).unwrap(),
        )
        .unwrap();
        let e = illuminance_from_fisheye(&front_fisheye(&indoor, None).unwrap()).unwrap();
        let pair = calibrate_pair(&indoor, &indoor, e).unwrap();
        assert!((pair.result.k - 1.0).abs() < 1e-12);
        if pair.result.k == 1.0 {
            assert_eq!(pair.indoor.image(), indoor.image());
        }
    }

    #[test]
    fn calibration_is_idempotent() {
        let indoor = HdrPanorama::new(
            RgbImage::from_fn(128, 64, |x, y| [0.1 + x as f32 * 1e-3, 0.2, 0.05 + y as f32 * 1e-3])
                .unwrap(),
        )
        .unwrap();
        let first = calibrate_pair(&indoor, &indoor, 500.0).unwrap();
        let mean = mean_disk_luminance(&front_fisheye(&first.indoor, None).unwrap()).unwrap();
        let second = calibrate_pair(&first.indoor, &first.outdoor, PI * mean).unwrap();
        assert!((second.result.k - 1.0).abs() < 1e-6);
    }

    #[test]
    fn percentage_error_examples() {
        let s = scene_error(3.0, 2.0);
        assert_eq!(s.pct_error, Some(50.0));
        let s = scene_error(uniform_luminance(3.0).unwrap(), uniform_luminance(2.0).unwrap());
        assert!((s.pct_error.unwrap() - 50.0).abs() < 1e-12);

        let same = error_stats(&[(7.0, 7.0)]).unwrap();
        assert_eq!(same.per_scene[0].pct_error, Some(0.0));
        assert_eq!(same.mean_abs_error_cdm2, 0.0);

        let st = error_stats(&[(10.0, 8.0), (5.0, 5.0)]).unwrap();
        assert_eq!(st.mean_abs_error_cdm2, 1.0);
        assert_eq!(st.per_scene[0].pct_error, Some(25.0));
        assert_eq!(st.per_scene[1].pct_error, Some(0.0));

        assert!(error_stats(&[]).is_err());
        assert_eq!(scene_error(1.0, 0.0).pct_error, None);
    }

    #[test]
    fn stats_csv_header() {
        let rows = vec![StatsRow::new("s01", 3.0, 2.0, 3.0)];
        let mut buf = Vec::new();
        write_stats_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scene_id,E_measured_lux,L_std_cdm2,L_lowcost_cdm2,abs_err_cdm2,pct_err"
        );
        assert_eq!(lines.next().unwrap(), "s01,3.0,2.0,3.0,1.0,50.0");
    }

    #[test]
    fn record_validation() {
        let ok = PhotometricRecord {
            indoor_illuminance_lux: 120.0,
            outdoor_illuminance_lux: 8000.0,
            target_luminance_cdm2: 40.0,
            orientation_deg: 270.0,
        };
        assert!(ok.validate().is_ok());
        assert!(PhotometricRecord { orientation_deg: 360.0, ..ok }.validate().is_err());
        assert!(PhotometricRecord { indoor_illuminance_lux: -1.0, ..ok }.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn field(a: f32, b: f32) -> OrthographicFisheye {
            OrthographicFisheye::from_disk_fn(48, move |x, y| {
                let v = (a * (1.0 + x as f32)) + b * (y as f32 * y as f32);
                [v, 0.5 * v, 0.25 * v]
            })
            .unwrap()
        }

        proptest! {
            #[test]
            fn homogeneity(a in 0.0f32..5.0, b in 0.0f32..5.0, c in 0.0f64..20.0) {
                let f = field(a, b);
                let e = illuminance_from_fisheye(&f).unwrap();
                let ec = illuminance_from_fisheye(&f.scaled(c)).unwrap();
                prop_assert!((ec - c * e).abs() <= 1e-6 * (c * e).max(1e-12));
            }

            #[test]
            fn additivity(a in 0.0f32..5.0, b in 0.0f32..5.0, a2 in 0.0f32..5.0, b2 in 0.0f32..5.0) {
                let f1 = field(a, b);
                let f2 = field(a2, b2);
                let sum = OrthographicFisheye::from_disk_fn(48, |x, y| {
                    let v = (a * (1.0 + x as f32)) + b * (y as f32 * y as f32)
                        + (a2 * (1.0 + x as f32)) + b2 * (y as f32 * y as f32);
                    [v, 0.5 * v, 0.25 * v]
                }).unwrap();
                let e1 = illuminance_from_fisheye(&f1).unwrap();
                let e2 = illuminance_from_fisheye(&f2).unwrap();
                let es = illuminance_from_fisheye(&sum).unwrap();
                prop_assert!((es - (e1 + e2)).abs() <= 1e-5 * (e1 + e2).max(1e-12));
            }

            #[test]
            fn error_stats_order_free(mut pairs in proptest::collection::vec((0.0f64..100.0, 0.1f64..100.0), 1..20)) {
                let a = error_stats(&pairs).unwrap();
                pairs.reverse();
                let b = error_stats(&pairs).unwrap();
                prop_assert_eq!(a.mean_abs_error_cdm2, b.mean_abs_error_cdm2);
                prop_assert_eq!(a.mean_pct_error, b.mean_pct_error);
            }
        }
    }
}
