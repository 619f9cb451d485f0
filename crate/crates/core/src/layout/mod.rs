//! Room layouts, kitchen wall selection and component placement.

mod component;
mod place;
mod room;
mod select;
mod validate;

pub use component::{Category, ComponentLibrary, ComponentSpec, KitchenComponent};
pub use place::{
    apply_transform, local_front, place_components, plan_json, CornerPolicy, PlacementEntry, PlacementPlan,
    PlacementTransform, transform_parts, WIDTH_SCALE_MAX, WIDTH_SCALE_MIN,
};
pub use room::{RoomLayout, RoomLayoutFile, Wall, WindowOpening};
pub use select::{
    cast_ray, classify_layout, column_azimuth, kitchen_run, select_kitchen_walls, wall_coverage,
    KitchenMask, LayoutType, RunLengthMask, WallCoverage, WallSelection,
    DEFAULT_COVERAGE_THRESHOLD,
};
pub use validate::{validate_plan, PlanReport, Violation};
