use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use super::place::{local_front, PlacementPlan};
use super::room::{point_in_polygon, RoomLayout};

pub const OVERLAP_AREA_TOLERANCE: f64 = 1e-9;
pub const DISTANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Overlap { first: usize, second: usize, area_m2: f64 },
    OutsideRoom { entry: usize, corner: [f64; 2] },
    NotFlush { entry: usize, distance_m: f64 },
    Misaligned { entry: usize },
    OffsetOutOfRange { entry: usize },
    UnknownWall { entry: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub violations: Vec<Violation>,
}

impl PlanReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn polygon_area(poly: &[Point2<f64>]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        / 2.0
}

/// Clips `subject` against the convex counter-clockwise polygon `clip`.
fn clip_convex(subject: &[Point2<f64>], clip: &[Point2<f64>]) -> Vec<Point2<f64>> {
    let mut out = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let edge = b - a;
        let side = |p: &Point2<f64>| edge.perp(&(p - a));
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(&cur), side(&prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    out.push(prev + (cur - prev) * (sp / (sp - sc)));
                }
                out.push(cur);
            } else if sp >= 0.0 {
                out.push(prev + (cur - prev) * (sp / (sp - sc)));
            }
        }
    }
    out
}

/// Intersection area of two convex counter-clockwise polygons.
pub fn overlap_area(a: &[Point2<f64>], b: &[Point2<f64>]) -> f64 {
    let clipped = clip_convex(a, b);
    if clipped.len() < 3 {
        0.0
    } else {
        polygon_area(&clipped).max(0.0)
    }
}

/// Checks footprint overlaps, containment in the floor polygon, flushness
/// against the assigned wall and offsets within the wall length.
pub fn validate_plan(plan: &PlacementPlan, layout: &RoomLayout) -> PlanReport {
    let mut violations = Vec::new();
    let footprints: Vec<[Point2<f64>; 4]> = plan.entries.iter().map(|e| e.footprint()).collect();
    for (i, e) in plan.entries.iter().enumerate() {
        if e.wall >= layout.wall_count() {
            violations.push(Violation::UnknownWall { entry: i });
            continue;
        }
        let wall = layout.wall(e.wall);
        if e.offset_m < -DISTANCE_TOLERANCE || e.end_m() > wall.length + DISTANCE_TOLERANCE {
            violations.push(Violation::OffsetOutOfRange { entry: i });
        }
        let fp = &footprints[i];
        let distance_m = wall
            .signed_distance(&fp[0])
            .abs()
            .max(wall.signed_distance(&fp[1]).abs());
        if distance_m >= DISTANCE_TOLERANCE {
            violations.push(Violation::NotFlush { entry: i, distance_m });
        }
        if (local_front(&e.transform).dot(&wall.inward_normal) - 1.0).abs() > 1e-9 {
            violations.push(Violation::Misaligned { entry: i });
        }
        for c in fp {
            if !point_in_polygon(layout.corners(), c, DISTANCE_TOLERANCE) {
                violations.push(Violation::OutsideRoom {
                    entry: i,
                    corner: [c.x, c.y],
                });
            }
        }
    }
    for i in 0..footprints.len() {
        for j in i + 1..footprints.len() {
            let area_m2 = overlap_area(&footprints[i], &footprints[j]);
            if area_m2 >= OVERLAP_AREA_TOLERANCE {
                violations.push(Violation::Overlap {
                    first: i,
                    second: j,
                    area_m2,
                });
            }
        }
    }
    PlanReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::fixtures::rect;
    use crate::layout::{place_components, Category, CornerPolicy, KitchenComponent};

    fn unit(id: &str, w: f64, d: f64) -> KitchenComponent {
        KitchenComponent::procedural(id, Category::Cabinet, w, d, 0.9).unwrap()
    }

    #[test]
    fn constructed_plan_is_clean() {
        let mut room = rect(4.0, 3.0);
        room.set_kitchen_walls(&[0]).unwrap();
        let comps: Vec<_> = [0.9, 0.6, 0.76, 0.9, 0.6]
            .iter()
            .enumerate()
            .map(|(i, &w)| unit(&format!("u{i}"), w, 0.6))
            .collect();
        let plan = place_components(&room, &comps, CornerPolicy::ScaleLast).unwrap();
        assert_eq!(validate_plan(&plan, &room), PlanReport::default());
    }

    #[test]
    fn manual_overlap_is_reported() {
        let mut room = rect(4.0, 3.0);
        room.set_kitchen_walls(&[0]).unwrap();
        let mut plan =
            place_components(&room, &[unit("a", 1.0, 0.6), unit("b", 1.0, 0.6)], CornerPolicy::LeaveGap).unwrap();
        plan.entries[1].offset_m = 0.5;
        plan.entries[1].transform.t_x = 1.0;
        let report = validate_plan(&plan, &room);
        match report.violations.as_slice() {
            [Violation::Overlap { first: 0, second: 1, area_m2 }] => {
                assert!((area_m2 - 0.5 * 0.6).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_deep_component_leaves_room() {
        let mut room = rect(4.0, 1.0);
        room.set_kitchen_walls(&[0]).unwrap();
        let plan = place_components(&room, &[unit("deep", 1.0, 1.2)], CornerPolicy::LeaveGap).unwrap();
        let report = validate_plan(&plan, &room);
        // oracle: the front corners at y = 1.2 lie beyond the wall at y = 1
        let outside: Vec<[f64; 2]> = plan.entries[0]
            .footprint()
            .iter()
            .filter(|c| !(0.0..=4.0).contains(&c.x) || !(0.0..=1.0).contains(&c.y))
            .map(|c| [c.x, c.y])
            .collect();
        assert_eq!(outside.len(), 2);
        let reported: Vec<[f64; 2]> = report
            .violations
            .iter()
            .filter_map(|v| match v {
                Violation::OutsideRoom { corner, .. } => Some(*corner),
                _ => None,
            })
            .collect();
        assert_eq!(reported, outside);
    }

    #[test]
    fn detached_component_is_not_flush() {
        let mut room = rect(4.0, 3.0);
        room.set_kitchen_walls(&[0]).unwrap();
        let mut plan = place_components(&room, &[unit("a", 1.0, 0.6)], CornerPolicy::LeaveGap).unwrap();
        plan.entries[0].transform.t_y = 0.01;
        assert!(matches!(
            validate_plan(&plan, &room).violations.as_slice(),
            [Violation::NotFlush { entry: 0, .. }]
        ));
    }

    #[test]
    fn overlap_area_of_squares() {
        let sq = |x: f64, y: f64| {
            [
                Point2::new(x, y),
                Point2::new(x + 1.0, y),
                Point2::new(x + 1.0, y + 1.0),
                Point2::new(x, y + 1.0),
            ]
        };
        assert!((overlap_area(&sq(0.0, 0.0), &sq(0.5, 0.5)) - 0.25).abs() < 1e-15);
        assert_eq!(overlap_area(&sq(0.0, 0.0), &sq(1.0, 0.0)), 0.0);
        assert_eq!(overlap_area(&sq(0.0, 0.0), &sq(3.0, 0.0)), 0.0);
    }
}
