use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{PlannerConfig, TaskId};
use crate::sem::TrainConfig;
use crate::worldsim::SkillId;

/// Per-task replacement for the planner preset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PresetOverride {
    pub epsilon: Option<f64>,
    pub max_depth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifelongConfig {
    /// Bootstrap initial states per new skill.
    pub m0: usize,
    /// Bootstrap parameters per initial state.
    pub p0: usize,
    /// Planning problems per train task per round.
    pub mp: usize,
    /// Overrides every preset search depth when set.
    pub max_depth: Option<usize>,
    pub max_expansions: usize,
    pub timeout_s: f64,
    /// Open nodes drawn per planning problem.
    pub n_l: usize,
    /// Paths kept and executed per planning problem.
    pub n_s: usize,
    /// Fine-tuning epochs per round.
    pub epochs: usize,
    /// Epochs for a freshly bootstrapped model.
    pub bootstrap_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub rounds: u32,
    /// Skills added at the start of each listed round.
    pub schedule: BTreeMap<u32, Vec<SkillId>>,
    pub eval_trials: usize,
    /// Set by the enclosing run configuration.
    #[serde(skip)]
    pub seed: u64,
    pub train_tasks: Vec<TaskId>,
    pub test_tasks: Vec<TaskId>,
    /// Blocks per color.
    pub counts: Vec<usize>,
    /// Wall-clock plan times go to the metrics only when set, so that
    /// repeated runs stay byte-identical by default.
    pub record_timings: bool,
    pub presets: BTreeMap<TaskId, PresetOverride>,
}

impl Default for LifelongConfig {
    fn default() -> Self {
        LifelongConfig {
            m0: 200,
            p0: 5,
            mp: 10,
            max_depth: None,
            max_expansions: 2000,
            timeout_s: 60.0,
            n_l: 20,
            n_s: 5,
            epochs: 300,
            bootstrap_epochs: 300,
            batch_size: 128,
            lr: crate::sem::DEFAULT_LR,
            rounds: 40,
            schedule: [
                (0, vec![SkillId::PickPlace]),
                (10, vec![SkillId::TraySlide]),
                (20, vec![SkillId::TraySweep]),
                (30, vec![SkillId::BinTilt]),
            ]
            .into_iter()
            .collect(),
            eval_trials: 20,
            seed: 0,
            train_tasks: vec![TaskId::A, TaskId::C],
            test_tasks: vec![TaskId::B, TaskId::D],
            counts: vec![3, 3],
            record_timings: false,
            presets: BTreeMap::new(),
        }
    }
}

impl LifelongConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m0 == 0 || self.p0 == 0 {
            return Err(Error::config("m0 and p0 must be at least 1"));
        }
        if self.n_s > self.n_l {
            return Err(Error::config(format!("n_s ({}) must not exceed n_l ({})", self.n_s, self.n_l)));
        }
        if self.eval_trials == 0 {
            return Err(Error::config("eval_trials must be at least 1"));
        }
        if self.batch_size == 0 || !(self.lr > 0.0) {
            return Err(Error::config("batch_size and lr must be positive"));
        }
        if !(self.timeout_s > 0.0) {
            return Err(Error::config("timeout_s must be positive"));
        }
        if self.rounds > 0 && !self.schedule.get(&0).is_some_and(|s| !s.is_empty()) {
            return Err(Error::config("the schedule must add at least one skill at round 0"));
        }
        if let Some((r, _)) = self.schedule.iter().find(|(r, _)| **r >= self.rounds.max(1)) {
            return Err(Error::config(format!("schedule round {r} is outside 0..{}", self.rounds)));
        }
        let mut seen = Vec::new();
        for k in self.schedule.values().flatten() {
            if seen.contains(k) {
                return Err(Error::config(format!("{k} is scheduled twice")));
            }
            seen.push(*k);
        }
        if self.counts.iter().sum::<usize>() == 0 {
            return Err(Error::config("at least one block is required"));
        }
        for o in self.presets.values() {
            if o.epsilon.is_some_and(|e| !(e >= 1.0) || !e.is_finite()) {
                return Err(Error::config("preset epsilon must be a finite value >= 1"));
            }
        }
        Ok(())
    }

    /// Skills enabled during `round`, in the order they were added.
    pub fn skills_at(&self, round: u32) -> Vec<SkillId> {
        self.schedule.range(..=round).flat_map(|(_, s)| s.iter().copied()).collect()
    }

    /// Skills added by the latest schedule entry at or before `round`.
    pub fn new_skills_at(&self, round: u32) -> Vec<SkillId> {
        self.schedule.range(..=round).next_back().map(|(_, s)| s.clone()).unwrap_or_default()
    }

    pub fn planner_config(&self, task: TaskId, skills: &[SkillId]) -> PlannerConfig {
        let mut cfg = PlannerConfig::preset(task, skills);
        cfg.max_expansions = self.max_expansions;
        cfg.timeout_s = self.timeout_s;
        if let Some(d) = self.max_depth {
            cfg.max_depth = d;
        }
        if let Some(o) = self.presets.get(&task) {
            if let Some(e) = o.epsilon {
                cfg.epsilon = e;
            }
            if let Some(d) = o.max_depth {
                cfg.max_depth = d;
            }
        }
        cfg
    }

    pub fn train_config(&self, epochs: usize) -> TrainConfig {
        TrainConfig { epochs, batch_size: self.batch_size, lr: self.lr, ..TrainConfig::default() }
    }

    pub fn all_tasks(&self) -> Vec<TaskId> {
        let mut t: Vec<TaskId> = self.train_tasks.iter().chain(&self.test_tasks).copied().collect();
        t.sort();
        t.dedup();
        t
    }
}

/// Stream tags so that seeds drawn for different purposes never coincide.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub enum SeedTag {
    ModelInit = 1,
    Bootstrap = 2,
    Train = 3,
    CollectState = 4,
    CollectPlan = 5,
    PathSample = 6,
    EvalState = 7,
    EvalPlan = 8,
    Random = 9,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes the base seed with a purpose tag and indices (round, task, trial, ...).
pub fn derive_seed(base: u64, tag: SeedTag, parts: &[u64]) -> u64 {
    let mut h = splitmix(base ^ splitmix(tag as u64));
    for &p in parts {
        h = splitmix(h ^ p);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_queries() {
        let c = LifelongConfig::default();
        assert_eq!(c.skills_at(0), vec![SkillId::PickPlace]);
        assert_eq!(c.skills_at(15), vec![SkillId::PickPlace, SkillId::TraySlide]);
        assert_eq!(c.new_skills_at(15), vec![SkillId::TraySlide]);
        assert_eq!(c.skills_at(39).len(), 4);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            LifelongConfig { n_s: 30, ..Default::default() },
            LifelongConfig { schedule: [(1, vec![SkillId::PickPlace])].into_iter().collect(), ..Default::default() },
            LifelongConfig { rounds: 5, ..Default::default() },
            LifelongConfig { eval_trials: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
        let mut twice = LifelongConfig::default();
        twice.schedule.insert(5, vec![SkillId::PickPlace]);
        assert!(twice.validate().is_err());
    }

    #[test]
    fn seeds_differ_by_every_part() {
        let a = derive_seed(7, SeedTag::EvalState, &[1, 2, 3]);
        assert_eq!(a, derive_seed(7, SeedTag::EvalState, &[1, 2, 3]));
        assert_ne!(a, derive_seed(8, SeedTag::EvalState, &[1, 2, 3]));
        assert_ne!(a, derive_seed(7, SeedTag::EvalPlan, &[1, 2, 3]));
        assert_ne!(a, derive_seed(7, SeedTag::EvalState, &[1, 3, 2]));
    }

    #[test]
    fn overrides_apply() {
        let mut c = LifelongConfig { max_expansions: 77, ..Default::default() };
        c.presets.insert(TaskId::B, PresetOverride { epsilon: Some(3.0), max_depth: None });
        let p = c.planner_config(TaskId::B, &[SkillId::PickPlace]);
        assert_eq!((p.epsilon, p.max_depth, p.max_expansions), (3.0, 5, 77));
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<LifelongConfig>(&json).unwrap(), c);
    }
}
