//! Single-bounce lighting: irradiance probes and the diffuse preview.

use std::f64::consts::PI;

use nalgebra::{Point2, Point3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bvh::{Bvh, Triangle};
use super::sampling::{cosine_hemisphere, stratified_cosine, to_world, SampleStream};
use super::{Emitter, SceneDescription};
use crate::error::{Error, Result};
use crate::layout::RoomLayout;
use crate::numeric::CompensatedSum;
use crate::projection::PerspectiveView;
use crate::radiance::{luminance_of, Rgb, RgbImage};

pub const MIN_PROBE_SAMPLES: usize = 64;
const RAY_EPSILON: f64 = 1e-7;
/// Preview pixels draw from streams above this base so they never coincide
/// with probe streams.
const PREVIEW_STREAM_BASE: u64 = 1 << 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub position: [f64; 3],
    pub normal: [f64; 3],
    pub samples: usize,
    pub seed: u64,
    /// Selects the random stream; distinct probes under one seed use distinct ids.
    #[serde(default)]
    pub id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub illuminance_lux: f64,
    pub stderr_lux: f64,
    /// Radiometric irradiance per channel.
    pub irradiance_rgb: [f64; 3],
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreviewSpec {
    pub view: PerspectiveView,
    pub position: [f64; 3],
    pub spp: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
struct Surface {
    albedo: [f64; 3],
    emission: [f64; 3],
}

struct Tracer<'a> {
    scene: &'a SceneDescription,
    bvh: Bvh,
    surfaces: Vec<Surface>,
    points: Vec<(Point3<f64>, [f64; 3])>,
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn mul3(a: [f64; 3], k: f64) -> [f64; 3] {
    [a[0] * k, a[1] * k, a[2] * k]
}

impl<'a> Tracer<'a> {
    fn new(scene: &'a SceneDescription) -> Result<Self> {
        scene.validate()?;
        let mut surfaces = Vec::new();
        let mut tris = Vec::new();
        let mut slot_index = std::collections::BTreeMap::new();
        for obj in &scene.objects {
            for part in obj.world_parts() {
                let sid = *slot_index.entry(part.slot.clone()).or_insert_with(|| {
                    surfaces.push(Surface {
                        albedo: scene.material(&part.slot).albedo,
                        emission: [0.0; 3],
                    });
                    surfaces.len() as u32 - 1
                });
                let p = |i: u32| Point3::from(part.mesh.positions[i as usize]);
                tris.extend(part.mesh.triangles.iter().map(|t| Triangle {
                    a: p(t[0]),
                    b: p(t[1]),
                    c: p(t[2]),
                    surface: sid,
                }));
            }
        }
        let mut points = Vec::new();
        for e in &scene.emitters {
            match e {
                Emitter::Point {
                    position,
                    intensity_rgb,
                } => points.push((Point3::from(*position), *intensity_rgb)),
                Emitter::Area {
                    corners,
                    radiance_rgb,
                } => {
                    surfaces.push(Surface {
                        albedo: [0.0; 3],
                        emission: *radiance_rgb,
                    });
                    let sid = surfaces.len() as u32 - 1;
                    let c = corners.map(Point3::from);
                    tris.push(Triangle { a: c[0], b: c[1], c: c[2], surface: sid });
                    tris.push(Triangle { a: c[0], b: c[2], c: c[3], surface: sid });
                }
            }
        }
        Ok(Self {
            scene,
            bvh: Bvh::build(tris),
            surfaces,
            points,
        })
    }

    fn env(&self, d: &Vector3<f64>) -> [f64; 3] {
        self.scene.environment.radiance(d)
    }

    /// Irradiance at `p` on a surface facing `n` from visible point emitters.
    fn point_irradiance(&self, p: &Point3<f64>, n: &Vector3<f64>) -> [f64; 3] {
        let mut e = [0.0; 3];
        for (q, intensity) in &self.points {
            let to = q - p;
            let r2 = to.norm_squared();
            let r = r2.sqrt();
            let l = to / r;
            let cos = n.dot(&l);
            if cos <= 0.0 || self.bvh.occluded(p, &l, RAY_EPSILON, r * (1.0 - 1e-9)) {
                continue;
            }
            e = add3(e, mul3(*intensity, cos / r2));
        }
        e
    }

    /// Surface hit along `d` from `o`: position, normal facing the ray origin, surface.
    fn hit(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<(Point3<f64>, Vector3<f64>, Surface)> {
        let h = self.bvh.intersect(o, d, RAY_EPSILON, f64::INFINITY)?;
        let tri = &self.bvh.triangles()[h.triangle];
        let mut n = tri.normal();
        if n.dot(d) > 0.0 {
            n = -n;
        }
        Some((o + d * h.t, n, self.surfaces[tri.surface as usize]))
    }

    /// Radiance leaving a surface under direct lighting only: emission plus
    /// diffuse reflection of point emitters and a one-sample environment estimate.
    fn direct_radiance(&self, p: &Point3<f64>, n: &Vector3<f64>, s: &Surface, rng: &mut ChaCha8Rng) -> [f64; 3] {
        if s.albedo == [0.0; 3] {
            return s.emission;
        }
        let d = to_world(&cosine_hemisphere(rng.gen(), rng.gen()), n);
        let env = if self.bvh.occluded(p, &d, RAY_EPSILON, f64::INFINITY) {
            [0.0; 3]
        } else {
            mul3(self.env(&d), PI)
        };
        let e = add3(self.point_irradiance(p, n), env);
        add3(
            s.emission,
            [s.albedo[0] / PI * e[0], s.albedo[1] / PI * e[1], s.albedo[2] / PI * e[2]],
        )
    }

    /// Radiance arriving at `o` from direction `d`.
    fn incident(&self, o: &Point3<f64>, d: &Vector3<f64>, rng: &mut ChaCha8Rng) -> [f64; 3] {
        match self.hit(o, d) {
            Some((p, n, s)) => self.direct_radiance(&p, &n, &s, rng),
            None => self.env(d),
        }
    }
}

fn check_inside(scene: &SceneDescription, p: &Point3<f64>) -> Result<()> {
    if let Some(room) = &scene.room {
        let layout = RoomLayout::from_file(room)?;
        let tol = 1e-9;
        if !layout.contains(&Point2::new(p.x, p.y)) || p.z < -tol || p.z > layout.height() + tol {
            return Err(Error::invalid(format!("position {p} lies outside the room")));
        }
    }
    Ok(())
}

/// Cosine-weighted Monte Carlo estimate of the illuminance at a point, with
/// point emitters added analytically.
pub fn irradiance_probe(scene: &SceneDescription, spec: &ProbeSpec) -> Result<ProbeResult> {
    if spec.samples < MIN_PROBE_SAMPLES {
        return Err(Error::invalid(format!(
            "probe needs at least {MIN_PROBE_SAMPLES} samples, got {}",
            spec.samples
        )));
    }
    let n = Vector3::from(spec.normal);
    if (n.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("probe normal {n} is not unit length")));
    }
    let p = Point3::from(spec.position);
    if !p.coords.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("probe position must be finite"));
    }
    check_inside(scene, &p)?;
    let tracer = Tracer::new(scene)?;
    let stream = SampleStream::new(spec.seed, spec.id);
    let count = spec.samples as u64;
    let estimates: Vec<[f64; 3]> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.sample(i);
            let d = stratified_cosine(&mut rng, &n, i, count);
            mul3(tracer.incident(&p, &d, &mut rng), PI)
        })
        .collect();
    let mut sums = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
    let mut lum = CompensatedSum::new();
    let lux: Vec<f64> = estimates.iter().map(|e| luminance_of(*e)).collect();
    for (e, l) in estimates.iter().zip(&lux) {
        for c in 0..3 {
            sums[c].add(e[c]);
        }
        lum.add(*l);
    }
    let nf = count as f64;
    let mean = lum.value() / nf;
    let var: f64 = lux.iter().map(|l| (l - mean) * (l - mean)).collect::<CompensatedSum>().value() / (nf - 1.0);
    let direct = tracer.point_irradiance(&p, &n);
    let irradiance_rgb = [
        sums[0].value() / nf + direct[0],
        sums[1].value() / nf + direct[1],
        sums[2].value() / nf + direct[2],
    ];
    Ok(ProbeResult {
        illuminance_lux: mean + luminance_of(direct),
        stderr_lux: (var / nf).sqrt(),
        irradiance_rgb,
        samples: spec.samples,
    })
}

/// Perspective render: visible surfaces are shaded as `albedo/π × E`, with
/// `E` estimated at the hit point; misses show the environment. Sample 0 of
/// every pixel goes through the pixel center.
pub fn preview_render(scene: &SceneDescription, spec: &PreviewSpec) -> Result<RgbImage> {
    spec.view.validate()?;
    if spec.spp == 0 {
        return Err(Error::invalid("preview needs at least one sample per pixel"));
    }
    let o = Point3::from(spec.position);
    check_inside(scene, &o)?;
    let tracer = Tracer::new(scene)?;
    let basis = spec.view.camera_basis();
    let (w, h) = (spec.view.width, spec.view.height);
    let spp = spec.spp as u64;
    let data: Vec<Rgb> = (0..w * h)
        .into_par_iter()
        .map(|idx| {
            let stream = SampleStream::new(spec.seed, PREVIEW_STREAM_BASE + idx as u64);
            let (cx, cy) = ((idx % w) as f64, (idx / w) as f64);
            let mut acc = [0.0f64; 3];
            for s in 0..spp {
                let mut rng = stream.sample(s);
                let (jx, jy) = if s == 0 { (0.5, 0.5) } else { (rng.gen(), rng.gen()) };
                let d = basis.ray(cx + jx, cy + jy);
                let l = match tracer.hit(&o, &d) {
                    None => tracer.env(&d),
                    Some((p, n, surf)) => {
                        let wi = stratified_cosine(&mut rng, &n, s, spp);
                        let e = add3(
                            tracer.point_irradiance(&p, &n),
                            mul3(tracer.incident(&p, &wi, &mut rng), PI),
                        );
                        add3(
                            surf.emission,
                            [surf.albedo[0] / PI * e[0], surf.albedo[1] / PI * e[1], surf.albedo[2] / PI * e[2]],
                        )
                    }
                };
                acc = add3(acc, l);
            }
            let k = 1.0 / spp as f64;
            [(acc[0] * k) as f32, (acc[1] * k) as f32, (acc[2] * k) as f32]
        })
        .collect();
    RgbImage::new(w, h, data)
}
