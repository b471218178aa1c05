//! Analytic block, tray and bin world used as ground truth.

mod execute;
mod geometry;
mod sampling;
mod skills;
mod state;

pub use execute::{execute_plan, ExecutionResult, FailureReason, Plan, PlanStep};
pub use geometry::{distance, horizontal_distance, Cuboid, Geometry, GridSpec, Rect, SkillConstants, Vec3};
pub use sampling::{pickable_blocks, sample_params, sample_placement, PLACEMENT_REGIONS};
pub use skills::{
    apply, apply_bin_tilt, apply_pick_place, apply_tray_slide, apply_tray_sweep, parse_skill_list, precondition,
    violation, SkillId, SkillParams,
};
pub use state::{
    region_of, region_rect, rest_z, sample_initial_state, sample_initial_state_with, scatter_into_fixtures,
    BlockFeature, Region, WorldState,
};
pub(crate) use state::quantize;
