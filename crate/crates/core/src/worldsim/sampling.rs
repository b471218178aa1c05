use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::geometry::{horizontal_distance, Geometry, Rect, Vec3};
use super::skills::{violation, SkillId, SkillParams};
use super::state::{region_of, rest_z, Region, WorldState};

/// Placement regions in the order of [`SkillConstants::placement_weights`](super::SkillConstants).
pub const PLACEMENT_REGIONS: [Region; 3] = [Region::Table, Region::BinNear, Region::Tray];

/// Draws up to `count` parameters that satisfy the skill's precondition at `state`.
///
/// Rejection sampling with `attempts_per_sample * count` attempts; may return fewer.
pub fn sample_params<R: Rng + ?Sized>(
    skill: SkillId,
    state: &WorldState,
    geom: &Geometry,
    rng: &mut R,
    count: usize,
) -> Vec<SkillParams> {
    let mut out = Vec::with_capacity(count);
    if count == 0 || !maybe_applicable(skill, state, geom) {
        return out;
    }
    let budget = geom.skills.attempts_per_sample * count;
    let pickable = if skill == SkillId::PickPlace { pickable_blocks(state, geom) } else { Vec::new() };
    if skill == SkillId::PickPlace && pickable.is_empty() {
        return out;
    }
    let weights = WeightedIndex::new(geom.skills.placement_weights).expect("validated placement weights");
    for _ in 0..budget {
        if out.len() == count {
            break;
        }
        let candidate = match skill {
            SkillId::PickPlace => {
                let block = pickable[rng.gen_range(0..pickable.len())];
                let region = PLACEMENT_REGIONS[weights.sample(rng)];
                match sample_placement(region, geom, rng) {
                    Some(place) => SkillParams::PickPlace { block_index: block, place },
                    None => continue,
                }
            }
            SkillId::TraySlide => SkillParams::TraySlide { bin_x: rng.gen_range(geom.bin.x[0]..=geom.bin.x[1]) },
            SkillId::TraySweep => SkillParams::TraySweep { start_x: rng.gen_range(geom.table.x[0]..=geom.table.x[1]) },
            SkillId::BinTilt => {
                let [lo, hi] = geom.skills.tilt_angle_range;
                SkillParams::BinTilt { angle_deg: rng.gen_range(lo..=hi) }
            }
        };
        if violation(state, &candidate, geom).is_none() {
            out.push(candidate);
        }
    }
    out
}

/// Indices of blocks on the table or tray with a collision-free grasp.
pub fn pickable_blocks(state: &WorldState, geom: &Geometry) -> Vec<u32> {
    let clearance = geom.skills.grasp_clearance;
    state
        .blocks
        .iter()
        .enumerate()
        .filter(|(i, b)| {
            matches!(region_of(&b.position, geom), Region::Table | Region::Tray)
                && state
                    .blocks
                    .iter()
                    .enumerate()
                    .all(|(j, o)| j == *i || horizontal_distance(&o.position, &b.position) > clearance)
        })
        .map(|(i, _)| i as u32)
        .collect()
}

/// Cheap state-only filter so hopeless skills skip the rejection loop.
fn maybe_applicable(skill: SkillId, state: &WorldState, geom: &Geometry) -> bool {
    let regions = state.regions(geom);
    match skill {
        SkillId::PickPlace => true,
        SkillId::TraySlide => regions.contains(&Region::Tray),
        SkillId::TraySweep => !regions.contains(&Region::Tray) && regions.contains(&Region::Table),
        SkillId::BinTilt => regions.iter().any(|r| r.is_bin()),
    }
}

/// Uniform point on the resting surface of a placement region, inset from its border.
pub fn sample_placement<R: Rng + ?Sized>(region: Region, geom: &Geometry, rng: &mut R) -> Option<Vec3> {
    let rect: Rect = match region {
        Region::Table => geom.table,
        Region::Tray => geom.tray,
        Region::BinNear => geom.bin_near(),
        Region::BinFar => geom.bin_far(),
        Region::OffWorld => return None,
    }
    .inset(geom.skills.placement_inset);
    let z = rest_z(region, geom)?;
    // The tray sits on the table, so table draws landing on it are redrawn.
    for _ in 0..32 {
        let p = [rng.gen_range(rect.x[0]..=rect.x[1]), rng.gen_range(rect.y[0]..=rect.y[1]), z];
        if region_of(&p, geom) == region {
            return Some(p);
        }
    }
    None
}
