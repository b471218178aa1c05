use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::worldsim::{region_of, Cuboid, Geometry, Region, SkillId, WorldState};

pub const RED: u32 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    A,
    B,
    C,
    D,
}

impl TaskId {
    pub const ALL: [TaskId; 4] = [TaskId::A, TaskId::B, TaskId::C, TaskId::D];

    pub fn letter(self) -> char {
        match self {
            TaskId::A => 'A',
            TaskId::B => 'B',
            TaskId::C => 'C',
            TaskId::D => 'D',
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(TaskId::A),
            "B" => Ok(TaskId::B),
            "C" => Ok(TaskId::C),
            "D" => Ok(TaskId::D),
            _ => Err(Error::config(format!("unknown task '{s}' (expected A, B, C or D)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetBlocks {
    All,
    Color(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetRegion {
    /// Either half of the bin.
    Bin,
    BinFar,
}

impl TargetRegion {
    pub fn contains(self, r: Region) -> bool {
        match self {
            TargetRegion::Bin => r.is_bin(),
            TargetRegion::BinFar => r == Region::BinFar,
        }
    }

    pub fn cuboid(self, geom: &Geometry) -> Cuboid {
        match self {
            TargetRegion::Bin => geom.bin_cuboid(),
            TargetRegion::BinFar => geom.bin_far_cuboid(),
        }
    }
}

/// Goal condition of one of the four block-moving tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub targets: TargetBlocks,
    pub region: TargetRegion,
    /// Non-target blocks must stay in [`Region::Table`].
    pub keep_others_on_table: bool,
}

impl TaskSpec {
    pub fn preset(id: TaskId) -> Self {
        let (targets, region, keep) = match id {
            TaskId::A => (TargetBlocks::All, TargetRegion::Bin, false),
            TaskId::B => (TargetBlocks::Color(RED), TargetRegion::Bin, true),
            TaskId::C => (TargetBlocks::All, TargetRegion::BinFar, false),
            TaskId::D => (TargetBlocks::Color(RED), TargetRegion::BinFar, true),
        };
        TaskSpec { id, targets, region, keep_others_on_table: keep }
    }

    pub fn is_target(&self, color: u32) -> bool {
        match self.targets {
            TargetBlocks::All => true,
            TargetBlocks::Color(c) => c == color,
        }
    }
}

pub fn goal_satisfied(state: &WorldState, task: &TaskSpec, geom: &Geometry) -> bool {
    state.blocks.iter().all(|b| {
        let r = region_of(&b.position, geom);
        if task.is_target(b.color) {
            task.region.contains(r)
        } else {
            !task.keep_others_on_table || r == Region::Table
        }
    })
}

/// Mean distance of the target blocks to the closest point of the target region.
pub fn heuristic(state: &WorldState, task: &TaskSpec, geom: &Geometry) -> f64 {
    let cuboid = task.region.cuboid(geom);
    let (sum, n) = state
        .blocks
        .iter()
        .filter(|b| task.is_target(b.color))
        .fold((0.0, 0usize), |(s, n), b| (s + cuboid.distance_to(&b.position), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    /// Heuristic inflation; 1 gives plain A*.
    pub epsilon: f64,
    pub max_depth: usize,
    pub max_expansions: usize,
    pub timeout_s: f64,
    /// Parameters drawn per skill at each expansion.
    pub branching: BTreeMap<SkillId, usize>,
    /// Positions are rounded to this many meters when detecting duplicate states.
    pub duplicate_quantum: f64,
    /// Expand a uniformly random open node instead of the lowest f.
    pub random_order: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            epsilon: 2.0,
            max_depth: 8,
            max_expansions: 2000,
            timeout_s: 60.0,
            branching: default_branching(),
            duplicate_quantum: 1e-3,
            random_order: false,
        }
    }
}

pub fn default_branching() -> BTreeMap<SkillId, usize> {
    SkillId::ALL.into_iter().map(|k| (k, if k == SkillId::PickPlace { 24 } else { 6 })).collect()
}

impl PlannerConfig {
    /// Inflation and depth used for a task given the enabled skills.
    ///
    /// The heuristic is a mean over blocks while costs add up per block, so
    /// the useful inflation depends on how many blocks a single skill can move
    /// and on which partial moves lead into dead ends (near-bin blocks for the
    /// far-bin tasks, swept green blocks for the red-only tasks).
    pub fn preset(task: TaskId, skills: &[SkillId]) -> Self {
        let pick_place_only = skills.iter().all(|k| *k == SkillId::PickPlace);
        let sweep = skills.contains(&SkillId::TraySweep);
        let (epsilon, max_depth) = match task {
            TaskId::A if pick_place_only => (100.0, 8),
            TaskId::A => (50.0, 10),
            TaskId::B if pick_place_only => (50.0, 5),
            TaskId::B if sweep => (5.0, 5),
            TaskId::B => (10.0, 5),
            TaskId::C => (15.0, 10),
            TaskId::D if pick_place_only => (20.0, 5),
            TaskId::D => (5.0, 5),
        };
        PlannerConfig { epsilon, max_depth, ..PlannerConfig::default() }
    }

    pub fn branching_for(&self, skill: SkillId) -> usize {
        self.branching.get(&skill).copied().unwrap_or(0)
    }

    pub fn validate(&self, skills: &[SkillId]) -> Result<()> {
        if !(self.epsilon >= 1.0) || !self.epsilon.is_finite() {
            return Err(Error::config(format!("epsilon must be a finite value >= 1, got {}", self.epsilon)));
        }
        if !(self.duplicate_quantum > 0.0) {
            return Err(Error::config("duplicate_quantum must be positive"));
        }
        if !(self.timeout_s > 0.0) {
            return Err(Error::config("timeout_s must be positive"));
        }
        for k in skills {
            if self.branching_for(*k) == 0 {
                return Err(Error::config(format!("branching for enabled skill {k} must be at least 1")));
            }
        }
        Ok(())
    }
}
