use nalgebra::{Point2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::component::{Category, KitchenComponent};
use super::room::RoomLayout;
use super::select::{classify_layout, kitchen_run, LayoutType};
use crate::error::{Error, Result};
use crate::mesh::MeshPart;

pub const WIDTH_SCALE_MIN: f64 = 0.5;
pub const WIDTH_SCALE_MAX: f64 = 1.5;
const FIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CornerPolicy {
    /// Stretch the last component on each wall so the run ends at the corner.
    #[default]
    ScaleLast,
    /// Leave the residual wall length empty.
    LeaveGap,
}

/// Rigid placement in the floor plane, with the width scale applied along
/// the component's local `x` before rotating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementTransform {
    pub theta_z: f64,
    pub t_x: f64,
    pub t_y: f64,
    pub width_scale: f64,
}

impl Default for PlacementTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl PlacementTransform {
    pub const IDENTITY: Self = Self {
        theta_z: 0.0,
        t_x: 0.0,
        t_y: 0.0,
        width_scale: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        if ![self.theta_z, self.t_x, self.t_y, self.width_scale]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::invalid("non-finite placement transform"));
        }
        if !(WIDTH_SCALE_MIN..=WIDTH_SCALE_MAX).contains(&self.width_scale) {
            return Err(Error::ScaleOutOfRange {
                scale: self.width_scale,
                min: WIDTH_SCALE_MIN,
                max: WIDTH_SCALE_MAX,
            });
        }
        Ok(())
    }

    /// Homogeneous 4×4 matrix, row-major, including the width scale.
    pub fn matrix(&self) -> [[f64; 4]; 4] {
        let (s, c) = self.theta_z.sin_cos();
        let k = self.width_scale;
        [
            [c * k, -s, 0.0, self.t_x],
            [s * k, c, 0.0, self.t_y],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.theta_z.sin_cos();
        let x = p[0] * self.width_scale;
        [c * x - s * p[1] + self.t_x, s * x + c * p[1] + self.t_y, p[2]]
    }

    pub fn apply_2d(&self, p: Point2<f64>) -> Point2<f64> {
        let q = self.apply([p.x, p.y, 0.0]);
        Point2::new(q[0], q[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementEntry {
    pub component: String,
    pub category: Category,
    pub wall: usize,
    /// Arc length from the wall's start corner to the component's left edge.
    pub offset_m: f64,
    pub width_m: f64,
    pub effective_width_m: f64,
    pub depth_m: f64,
    pub height_m: f64,
    pub transform: PlacementTransform,
}

impl PlacementEntry {
    /// Floor footprint corners: back-left, back-right, front-right, front-left.
    pub fn footprint(&self) -> [Point2<f64>; 4] {
        let hw = self.width_m / 2.0;
        let t = &self.transform;
        [
            t.apply_2d(Point2::new(-hw, 0.0)),
            t.apply_2d(Point2::new(hw, 0.0)),
            t.apply_2d(Point2::new(hw, self.depth_m)),
            t.apply_2d(Point2::new(-hw, self.depth_m)),
        ]
    }

    pub fn end_m(&self) -> f64 {
        self.offset_m + self.effective_width_m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub layout_type: LayoutType,
    pub policy: CornerPolicy,
    /// Kitchen walls in run order.
    pub walls: Vec<usize>,
    pub entries: Vec<PlacementEntry>,
}

impl PlacementPlan {
    pub fn entries_on(&self, wall: usize) -> impl Iterator<Item = &PlacementEntry> {
        self.entries.iter().filter(move |e| e.wall == wall)
    }
}

/// Canonical JSON text of a plan; every producer goes through this so that
/// outputs are byte-comparable.
pub fn plan_json(plan: &PlacementPlan) -> String {
    let mut s = serde_json::to_string_pretty(plan).expect("plan serializes");
    s.push('\n');
    s
}

fn transform_for(layout: &RoomLayout, wall: usize, offset: f64, effective: f64, width: f64) -> PlacementTransform {
    let w = layout.wall(wall);
    let centre: Point2<f64> = w.start + w.direction * (offset + effective / 2.0);
    PlacementTransform {
        theta_z: w.direction.y.atan2(w.direction.x),
        t_x: centre.x,
        t_y: centre.y,
        width_scale: effective / width,
    }
}

/// Lays components side by side along the kitchen walls in sequence order.
///
/// Walls are filled greedily: a component that does not fit in the rest of
/// the current wall moves to the next one. Every wall after the first starts
/// at the depth of the previous wall's last component, which occupies the
/// shared corner.
pub fn place_components(
    layout: &RoomLayout,
    components: &[KitchenComponent],
    policy: CornerPolicy,
) -> Result<PlacementPlan> {
    let layout_type = classify_layout(layout)?;
    let run = kitchen_run(layout)?;
    if components.is_empty() {
        return Err(Error::EmptySequence);
    }
    for c in components {
        c.validate()?;
    }

    let mut entries: Vec<PlacementEntry> = Vec::with_capacity(components.len());
    let mut slot = 0usize;
    let mut cursor = 0.0;
    let mut wall_first = 0usize;
    for c in components {
        loop {
            let wall = run[slot];
            let len = layout.wall(wall).length;
            if cursor + c.width <= len + FIT_EPS {
                entries.push(PlacementEntry {
                    component: c.id.clone(),
                    category: c.category,
                    wall,
                    offset_m: cursor,
                    width_m: c.width,
                    effective_width_m: c.width,
                    depth_m: c.depth,
                    height_m: c.height,
                    transform: transform_for(layout, wall, cursor, c.width, c.width),
                });
                cursor += c.width;
                break;
            }
            close_wall(layout, &mut entries[wall_first..], policy)?;
            slot += 1;
            if slot == run.len() {
                return Err(Error::PlacementOverflow(format!(
                    "component '{}' ({} m) does not fit on the remaining kitchen walls",
                    c.id, c.width
                )));
            }
            cursor = if entries.len() > wall_first {
                entries.last().expect("non-empty").depth_m
            } else {
                0.0
            };
            wall_first = entries.len();
        }
    }
    close_wall(layout, &mut entries[wall_first..], policy)?;

    Ok(PlacementPlan {
        layout_type,
        policy,
        walls: run,
        entries,
    })
}

fn close_wall(layout: &RoomLayout, on_wall: &mut [PlacementEntry], policy: CornerPolicy) -> Result<()> {
    let Some(last) = on_wall.last_mut() else {
        return Ok(());
    };
    if policy == CornerPolicy::LeaveGap {
        return Ok(());
    }
    let len = layout.wall(last.wall).length;
    let effective = len - last.offset_m;
    let scale = effective / last.width_m;
    if !(WIDTH_SCALE_MIN..=WIDTH_SCALE_MAX).contains(&scale) {
        return Err(Error::ScaleOutOfRange {
            scale,
            min: WIDTH_SCALE_MIN,
            max: WIDTH_SCALE_MAX,
        });
    }
    last.effective_width_m = effective;
    last.transform = transform_for(layout, last.wall, last.offset_m, effective, last.width_m);
    Ok(())
}

/// Component geometry mapped into the room frame.
pub fn apply_transform(component: &KitchenComponent, t: &PlacementTransform) -> Result<Vec<MeshPart>> {
    Ok(transform_parts(&component.geometry()?, t))
}

pub fn transform_parts(parts: &[MeshPart], t: &PlacementTransform) -> Vec<MeshPart> {
    parts
        .par_iter()
        .map(|p| MeshPart {
            slot: p.slot.clone(),
            mesh: p.mesh.map_positions(|v| t.apply(v)),
        })
        .collect()
}

/// Direction of a placed component's local `+y` (its front) in the room frame.
pub fn local_front(t: &PlacementTransform) -> Vector2<f64> {
    Vector2::new(-t.theta_z.sin(), t.theta_z.cos())
}
