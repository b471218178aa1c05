//! Ground-truth skill semantics: preconditions, terminal states and costs.
//!
//! Every skill starts and ends at the end-effector home point, so a skill's cost
//! depends only on the state it starts from and its parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geometry::{distance, horizontal_distance, Geometry, Vec3};
use super::state::{region_of, rest_z, Region, WorldState};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillId {
    PickPlace,
    TraySlide,
    TraySweep,
    BinTilt,
}

impl SkillId {
    pub const ALL: [SkillId; 4] = [SkillId::PickPlace, SkillId::TraySlide, SkillId::TraySweep, SkillId::BinTilt];

    pub fn name(self) -> &'static str {
        match self {
            SkillId::PickPlace => "pick_place",
            SkillId::TraySlide => "tray_slide",
            SkillId::TraySweep => "tray_sweep",
            SkillId::BinTilt => "bin_tilt",
        }
    }

    /// Width of the parameter encoding appended to every node feature.
    pub fn theta_dim(self) -> usize {
        match self {
            SkillId::PickPlace => 5,
            _ => 1,
        }
    }
}

impl fmt::Display for SkillId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SkillId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        SkillId::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::config(format!("unknown skill '{s}'")))
    }
}

/// Parses a comma separated skill list such as `pick_place,tray_slide`.
pub fn parse_skill_list(s: &str) -> Result<Vec<SkillId>> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let k: SkillId = part.parse()?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    if out.is_empty() {
        return Err(Error::config("skill list is empty"));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SkillParams {
    PickPlace { block_index: u32, place: Vec3 },
    TraySlide { bin_x: f64 },
    TraySweep { start_x: f64 },
    BinTilt { angle_deg: f64 },
}

impl SkillParams {
    pub fn skill(&self) -> SkillId {
        match self {
            SkillParams::PickPlace { .. } => SkillId::PickPlace,
            SkillParams::TraySlide { .. } => SkillId::TraySlide,
            SkillParams::TraySweep { .. } => SkillId::TraySweep,
            SkillParams::BinTilt { .. } => SkillId::BinTilt,
        }
    }

    /// Continuous part of the parameter, used as the metric space for dispersion.
    pub fn continuous(&self) -> Vec<f64> {
        match *self {
            SkillParams::PickPlace { place, .. } => place.to_vec(),
            SkillParams::TraySlide { bin_x } => vec![bin_x],
            SkillParams::TraySweep { start_x } => vec![start_x],
            SkillParams::BinTilt { angle_deg } => vec![angle_deg],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.continuous().iter().all(|v| v.is_finite())
    }
}

impl fmt::Display for SkillParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkillParams::PickPlace { block_index, place } => {
                write!(f, "block={block_index}, place=({:.3}, {:.3}, {:.3})", place[0], place[1], place[2])
            }
            SkillParams::TraySlide { bin_x } => write!(f, "bin_x={bin_x:.3}"),
            SkillParams::TraySweep { start_x } => write!(f, "start_x={start_x:.3}"),
            SkillParams::BinTilt { angle_deg } => write!(f, "angle={angle_deg:.1}deg"),
        }
    }
}

fn ensure_variant(skill: SkillId, params: &SkillParams) -> Result<()> {
    if params.skill() != skill {
        return Err(Error::contract(format!("{} parameters passed to {skill}", params.skill())));
    }
    Ok(())
}

/// Initiation set of `skill`. Errors only when `params` belongs to another skill.
pub fn precondition(skill: SkillId, state: &WorldState, params: &SkillParams, geom: &Geometry) -> Result<bool> {
    ensure_variant(skill, params)?;
    Ok(violation(state, params, geom).is_none())
}

/// Why `params` cannot run from `state`, or `None` when the precondition holds.
pub fn violation(state: &WorldState, params: &SkillParams, geom: &Geometry) -> Option<&'static str> {
    let sk = &geom.skills;
    match *params {
        SkillParams::PickPlace { block_index, place } => {
            let i = block_index as usize;
            let Some(target) = state.blocks.get(i) else {
                return Some("block index out of range");
            };
            if !matches!(region_of(&target.position, geom), Region::Table | Region::Tray) {
                return Some("target block is not on the table or tray");
            }
            let crowded = state
                .blocks
                .iter()
                .enumerate()
                .any(|(j, b)| j != i && horizontal_distance(&b.position, &target.position) <= sk.grasp_clearance);
            if crowded {
                return Some("no collision-free grasp");
            }
            if !place.iter().all(|v| v.is_finite()) {
                return Some("placement is not finite");
            }
            if !matches!(region_of(&place, geom), Region::Table | Region::Tray | Region::BinNear) {
                return Some("placement outside table, tray and near bin");
            }
            if place[0] > geom.reach_limit_x {
                return Some("placement beyond reach");
            }
            let blocked = state
                .blocks
                .iter()
                .enumerate()
                .any(|(j, b)| j != i && horizontal_distance(&b.position, &place) <= sk.placement_clearance);
            if blocked {
                return Some("placement is not collision free");
            }
            None
        }
        SkillParams::TraySlide { bin_x } => {
            if !(bin_x >= geom.bin.x[0] && bin_x <= geom.bin.x[1]) {
                return Some("slide point outside the bin");
            }
            if !state.blocks.iter().any(|b| region_of(&b.position, geom) == Region::Tray) {
                return Some("tray is empty");
            }
            None
        }
        SkillParams::TraySweep { start_x } => {
            if !(start_x >= geom.table.x[0] && start_x <= geom.table.x[1]) {
                return Some("sweep start outside the table");
            }
            let regions = state.regions(geom);
            if regions.contains(&Region::Tray) {
                return Some("tray is loaded");
            }
            let on_table = || state.blocks.iter().zip(&regions).filter(|(_, r)| **r == Region::Table).map(|(b, _)| b);
            if on_table().any(|b| (b.position[0] - start_x).abs() <= sk.sweep_clearance) {
                return Some("tray would land on a block");
            }
            if !on_table().any(|b| b.position[0] > start_x) {
                return Some("nothing to sweep");
            }
            None
        }
        SkillParams::BinTilt { angle_deg } => {
            let [lo, hi] = sk.tilt_angle_range;
            if !(angle_deg >= lo && angle_deg <= hi) {
                return Some("tilt angle outside range");
            }
            if !state.blocks.iter().any(|b| region_of(&b.position, geom).is_bin()) {
                return Some("bin is empty");
            }
            None
        }
    }
}

/// Runs the ground-truth effect of a skill, returning the terminal state and cost.
pub fn apply(state: &WorldState, params: &SkillParams, geom: &Geometry) -> Result<(WorldState, f64)> {
    if let Some(reason) = violation(state, params, geom) {
        return Err(Error::Precondition { skill: params.skill(), reason: reason.to_string() });
    }
    Ok(match *params {
        SkillParams::PickPlace { block_index, place } => pick_place_effect(state, block_index, place, geom),
        SkillParams::TraySlide { bin_x } => tray_slide_effect(state, bin_x, geom),
        SkillParams::TraySweep { start_x } => tray_sweep_effect(state, start_x, geom),
        SkillParams::BinTilt { angle_deg } => bin_tilt_effect(state, angle_deg, geom),
    })
}

pub fn apply_pick_place(state: &WorldState, params: &SkillParams, geom: &Geometry) -> Result<(WorldState, f64)> {
    ensure_variant(SkillId::PickPlace, params)?;
    apply(state, params, geom)
}

pub fn apply_tray_slide(state: &WorldState, params: &SkillParams, geom: &Geometry) -> Result<(WorldState, f64)> {
    ensure_variant(SkillId::TraySlide, params)?;
    apply(state, params, geom)
}

pub fn apply_tray_sweep(state: &WorldState, params: &SkillParams, geom: &Geometry) -> Result<(WorldState, f64)> {
    ensure_variant(SkillId::TraySweep, params)?;
    apply(state, params, geom)
}

pub fn apply_bin_tilt(state: &WorldState, params: &SkillParams, geom: &Geometry) -> Result<(WorldState, f64)> {
    ensure_variant(SkillId::BinTilt, params)?;
    apply(state, params, geom)
}

fn pick_place_effect(state: &WorldState, block_index: u32, place: Vec3, geom: &Geometry) -> (WorldState, f64) {
    let region = region_of(&place, geom);
    let z = rest_z(region, geom).expect("precondition keeps placements on a fixture");
    let target = [place[0], place[1], z];
    let mut next = state.clone();
    let block = &mut next.blocks[block_index as usize];
    let from = block.position;
    block.position = target;
    let penalty = if region == Region::BinNear { geom.skills.bin_penalty } else { 0.0 };
    let cost = distance(&geom.home, &from) + distance(&from, &target) + penalty;
    (next, cost)
}

fn landing_y(y: f64, geom: &Geometry) -> f64 {
    let r = geom.bin.inset(geom.skills.landing_inset);
    y.clamp(r.y[0], r.y[1])
}

fn tray_slide_effect(state: &WorldState, bin_x: f64, geom: &Geometry) -> (WorldState, f64) {
    let inner = geom.bin.inset(geom.skills.landing_inset);
    let z = geom.bin_rest_z();
    let mut next = state.clone();
    for b in next.blocks.iter_mut() {
        if region_of(&b.position, geom) == Region::Tray {
            let x = (bin_x + geom.landing_offset(b.index)).clamp(inner.x[0], inner.x[1]);
            b.position = [x, landing_y(b.position[1], geom), z];
        }
    }
    let tray = geom.tray_center();
    let cost = distance(&geom.home, &tray) + distance(&tray, &geom.slide_point(bin_x)) + geom.skills.slide_cost;
    (next, cost)
}

fn tray_sweep_effect(state: &WorldState, start_x: f64, geom: &Geometry) -> (WorldState, f64) {
    let z = geom.bin_rest_z();
    let landing = geom.skills.sweep_landing_x;
    let mut next = state.clone();
    for b in next.blocks.iter_mut() {
        if region_of(&b.position, geom) == Region::Table && b.position[0] > start_x {
            b.position = [landing + geom.landing_offset(b.index), landing_y(b.position[1], geom), z];
        }
    }
    let tray = geom.tray_center();
    let cost = distance(&geom.home, &tray)
        + distance(&tray, &geom.sweep_start_point(start_x))
        + (geom.table.x[1] - start_x)
        + geom.skills.sweep_cost;
    (next, cost)
}

fn bin_tilt_effect(state: &WorldState, angle_deg: f64, geom: &Geometry) -> (WorldState, f64) {
    let sk = &geom.skills;
    let mut next = state.clone();
    if angle_deg >= sk.friction_threshold_deg {
        let far = geom.bin_far().inset(sk.landing_inset);
        for b in next.blocks.iter_mut() {
            if region_of(&b.position, geom) == Region::BinNear {
                b.position[0] = (b.position[0] + sk.tilt_shift).clamp(far.x[0], far.x[1]);
            }
        }
    }
    let cost = 2.0 * distance(&geom.home, &geom.bin_handle) + sk.tilt_cost_per_deg * angle_deg;
    (next, cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::state::{sample_initial_state, BlockFeature};

    fn geom() -> Geometry {
        Geometry::default()
    }

    fn state_from(positions: &[Vec3]) -> WorldState {
        WorldState::new(
            positions
                .iter()
                .enumerate()
                .map(|(i, p)| BlockFeature { position: *p, color: (i % 2) as u32, index: i as u32 })
                .collect(),
        )
        .unwrap()
    }

    fn bin_point(g: &Geometry, x: f64) -> Vec3 {
        [x, g.bin.center()[1], g.bin_rest_z()]
    }

    #[test]
    fn skill_names_roundtrip() {
        for k in SkillId::ALL {
            assert_eq!(k.name().parse::<SkillId>().unwrap(), k);
        }
        assert_eq!(parse_skill_list("pick_place, tray-slide").unwrap(), vec![SkillId::PickPlace, SkillId::TraySlide]);
        assert!(parse_skill_list("jump").is_err());
    }

    #[test]
    fn mismatched_params_are_a_contract_error() {
        let g = geom();
        let s = sample_initial_state(&g, &[3, 3], 0).unwrap();
        let p = SkillParams::BinTilt { angle_deg: 10.0 };
        assert!(matches!(precondition(SkillId::TraySlide, &s, &p, &g), Err(Error::Contract(_))));
        assert!(matches!(apply_pick_place(&s, &p, &g), Err(Error::Contract(_))));
    }

    #[test]
    fn bin_tilt_needs_a_block_in_bin() {
        let g = geom();
        let s = sample_initial_state(&g, &[3, 3], 0).unwrap();
        let p = SkillParams::BinTilt { angle_deg: 15.0 };
        assert!(!precondition(SkillId::BinTilt, &s, &p, &g).unwrap());
        assert!(matches!(apply(&s, &p, &g), Err(Error::Precondition { .. })));
    }

    #[test]
    fn tray_slide_with_one_block_on_tray() {
        let g = geom();
        let s = state_from(&[g.tray_center(), [0.40, -0.15, g.table_rest_z()]]);
        let p = SkillParams::TraySlide { bin_x: 0.85 };
        assert!(precondition(SkillId::TraySlide, &s, &p, &g).unwrap());
    }

    #[test]
    fn pick_place_onto_another_block_is_blocked() {
        let g = geom();
        let a = [0.40, -0.20, g.table_rest_z()];
        let b = [0.50, -0.05, g.table_rest_z()];
        let s = state_from(&[a, b]);
        let p = SkillParams::PickPlace { block_index: 0, place: b };
        assert!(!precondition(SkillId::PickPlace, &s, &p, &g).unwrap());
    }

    #[test]
    fn pick_place_in_place_costs_only_the_approach() {
        let g = geom();
        let a = [0.40, -0.20, g.table_rest_z()];
        let s = state_from(&[a, [0.55, 0.05, g.table_rest_z()]]);
        let (next, cost) = apply(&s, &SkillParams::PickPlace { block_index: 0, place: a }, &g).unwrap();
        assert_eq!(next, s);
        assert!((cost - distance(&g.home, &a)).abs() < 1e-15);
    }

    #[test]
    fn pick_place_golden_cost() {
        // home (0.40,-0.15,0.30); block (0.45,-0.15,0.02); place (0.85,-0.10,-0.08) in the near bin.
        // |home-block| = sqrt(0.05^2 + 0.28^2) = sqrt(0.0809)
        // |block-place| = sqrt(0.40^2 + 0.05^2 + 0.10^2) = sqrt(0.1725)
        let mut g = geom();
        g.skills.bin_penalty = 0.10;
        let s = state_from(&[[0.45, -0.15, 0.02]]);
        let place = [0.85, -0.10, -0.08];
        let (next, cost) = apply(&s, &SkillParams::PickPlace { block_index: 0, place }, &g).unwrap();
        let expected = 0.0809f64.sqrt() + 0.1725f64.sqrt() + 0.10;
        assert!((cost - expected).abs() < 1e-12, "{cost} vs {expected}");
        assert!((cost - 0.799_760_446_1).abs() < 1e-9);
        assert_eq!(region_of(&next.blocks[0].position, &g), Region::BinNear);
    }

    #[test]
    fn bin_placement_adds_penalty() {
        let g = geom();
        let s = state_from(&[[0.45, -0.15, 0.02]]);
        let table_place = [0.45, 0.05, g.table_rest_z()];
        let (_, c_table) = apply(&s, &SkillParams::PickPlace { block_index: 0, place: table_place }, &g).unwrap();
        let expected_table = distance(&g.home, &s.blocks[0].position) + distance(&s.blocks[0].position, &table_place);
        assert!((c_table - expected_table).abs() < 1e-12);
        let bin = bin_point(&g, 0.85);
        let (_, c_bin) = apply(&s, &SkillParams::PickPlace { block_index: 0, place: bin }, &g).unwrap();
        let expected_bin = distance(&g.home, &s.blocks[0].position) + distance(&s.blocks[0].position, &bin) + 1.0;
        assert!((c_bin - expected_bin).abs() < 1e-12);
    }

    #[test]
    fn far_bin_is_unreachable_by_pick_place() {
        let g = geom();
        let s = state_from(&[[0.45, -0.15, 0.02]]);
        let far = bin_point(&g, 1.0);
        assert!(!precondition(SkillId::PickPlace, &s, &SkillParams::PickPlace { block_index: 0, place: far }, &g).unwrap());
    }

    #[test]
    fn slide_to_far_half_lands_all_in_far_bin() {
        let g = geom();
        let ty = -0.30;
        let s = state_from(&[[0.60, ty, 0.03], [0.66, -0.22, 0.03], [0.63, -0.40, 0.03], [0.40, -0.15, 0.02]]);
        let (next, cost) = apply(&s, &SkillParams::TraySlide { bin_x: 1.05 }, &g).unwrap();
        let r = next.regions(&g);
        assert_eq!(&r[..3], &[Region::BinFar; 3]);
        assert_eq!(r[3], Region::Table);
        assert_eq!(next.blocks[3], s.blocks[3]);
        assert!(cost > 0.0);
    }

    #[test]
    fn slide_offsets_spread_three_blocks() {
        // Offsets ((k mod 3) - 1) * 0.045 around the near-half center 0.85.
        let g = geom();
        let s = state_from(&[[0.60, -0.30, 0.03], [0.66, -0.22, 0.03], [0.63, -0.40, 0.03]]);
        let (next, _) = apply(&s, &SkillParams::TraySlide { bin_x: 0.85 }, &g).unwrap();
        let xs: Vec<f64> = next.blocks.iter().map(|b| b.position[0]).collect();
        assert!((xs[0] - 0.805).abs() < 1e-12);
        assert!((xs[1] - 0.850).abs() < 1e-12);
        assert!((xs[2] - 0.895).abs() < 1e-12);
        assert!(next.regions(&g).iter().all(|r| *r == Region::BinNear));
    }

    #[test]
    fn sweep_from_left_edge_clears_table() {
        let g = geom();
        let s = sample_initial_state(&g, &[3, 3], 9).unwrap();
        let min_x = s.blocks.iter().map(|b| b.position[0]).fold(f64::INFINITY, f64::min);
        let p = SkillParams::TraySweep { start_x: min_x - 0.05 };
        let (next, _) = apply(&s, &p, &g).unwrap();
        assert!(next.regions(&g).iter().all(|r| *r == Region::BinNear));
    }

    #[test]
    fn sweep_past_every_block_is_not_applicable() {
        let g = geom();
        let s = sample_initial_state(&g, &[3, 3], 9).unwrap();
        let max_x = s.blocks.iter().map(|b| b.position[0]).fold(f64::NEG_INFINITY, f64::max);
        let p = SkillParams::TraySweep { start_x: max_x + 0.05 };
        assert!(!precondition(SkillId::TraySweep, &s, &p, &g).unwrap());
    }

    #[test]
    fn sweep_cost_decreases_with_start() {
        let g = geom();
        let s = state_from(&[[0.69, 0.10, 0.02]]);
        let mut prev = f64::INFINITY;
        let mut x = 0.30;
        while x < 0.65 {
            let (_, c) = apply(&s, &SkillParams::TraySweep { start_x: x }, &g).unwrap();
            assert!(c < prev, "cost at {x} = {c} not below {prev}");
            prev = c;
            x += 0.01;
        }
    }

    #[test]
    fn shallow_tilt_moves_nothing() {
        let g = geom();
        let s = state_from(&[bin_point(&g, 0.80), bin_point(&g, 1.05)]);
        let (next, cost) = apply(&s, &SkillParams::BinTilt { angle_deg: 5.0 }, &g).unwrap();
        assert_eq!(next, s);
        assert!(cost > 0.0);
    }

    #[test]
    fn steep_tilt_moves_near_blocks_far() {
        let g = geom();
        let mut far = bin_point(&g, 1.05);
        far[1] = 0.0;
        let s = state_from(&[bin_point(&g, 0.80), bin_point(&g, 0.90), far]);
        let (next, _) = apply(&s, &SkillParams::BinTilt { angle_deg: 20.0 }, &g).unwrap();
        assert_eq!(next.regions(&g), vec![Region::BinFar; 3]);
        assert_eq!(next.blocks[2], s.blocks[2]);
    }

    #[test]
    fn params_json_is_tagged() {
        let p = SkillParams::PickPlace { block_index: 2, place: [0.5, 0.0, 0.02] };
        let v = serde_json::to_value(p).unwrap();
        assert_eq!(v["type"], "pick_place");
        assert_eq!(serde_json::from_value::<SkillParams>(v).unwrap(), p);
    }
}
