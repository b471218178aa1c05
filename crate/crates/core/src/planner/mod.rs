//! Weighted A* over the skill-parameter graph, task goals and data-collection paths.

mod paths;
pub mod search;
mod task;
mod trace;

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::worldsim::{apply, sample_params, Geometry, Plan, PlanStep, SkillId, SkillParams, WorldState};
use search::{best_first, Order, SearchLimits, SearchProblem};

pub use paths::{extract_weighted_paths, path_weight};
pub use search::{Outcome, SearchGraph, SearchNode};
pub use task::{default_branching, goal_satisfied, heuristic, PlannerConfig, TargetBlocks, TargetRegion, TaskId, TaskSpec, RED};
pub use trace::format_trace;

/// Learned edge costs are floored here so `g` stays strictly increasing.
pub const MIN_EDGE_COST: f64 = 1e-4;

/// Predicts the terminal state and cost of executing a skill.
pub trait EffectBackend {
    /// One `(successor, cost)` per entry of `params`, in order.
    fn predict(&self, skill: SkillId, state: &WorldState, params: &[SkillParams]) -> Result<Vec<(WorldState, f64)>>;
}

/// Exact effects from the analytic simulator.
#[derive(Clone, Debug, Default)]
pub struct GroundTruthBackend {
    pub geom: Geometry,
}

impl GroundTruthBackend {
    pub fn new(geom: Geometry) -> Self {
        GroundTruthBackend { geom }
    }
}

impl EffectBackend for GroundTruthBackend {
    fn predict(&self, _skill: SkillId, state: &WorldState, params: &[SkillParams]) -> Result<Vec<(WorldState, f64)>> {
        params.iter().map(|p| apply(state, p, &self.geom)).collect()
    }
}

impl<B: EffectBackend + ?Sized> EffectBackend for &B {
    fn predict(&self, skill: SkillId, state: &WorldState, params: &[SkillParams]) -> Result<Vec<(WorldState, f64)>> {
        (**self).predict(skill, state, params)
    }
}

pub type Successor = (SkillParams, WorldState, f64);

/// Samples parameters for every enabled skill and asks the backend for their effects.
///
/// Successors with non-finite states or costs are dropped.
pub fn expand<B: EffectBackend + ?Sized>(
    state: &WorldState,
    skills: &[SkillId],
    backend: &B,
    cfg: &PlannerConfig,
    geom: &Geometry,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Successor>> {
    let mut out = Vec::new();
    for &skill in skills {
        let params = sample_params(skill, state, geom, rng, cfg.branching_for(skill));
        if params.is_empty() {
            continue;
        }
        let effects = backend.predict(skill, state, &params).map_err(|e| Error::Expansion(format!("{skill}: {e}")))?;
        if effects.len() != params.len() {
            return Err(Error::Expansion(format!("{skill}: backend returned {} effects for {} parameters", effects.len(), params.len())));
        }
        for (p, (next, cost)) in params.into_iter().zip(effects) {
            let finite = cost.is_finite() && next.blocks.iter().all(|b| b.position.iter().all(|v| v.is_finite()));
            if finite {
                out.push((p, next, cost.max(MIN_EDGE_COST)));
            }
        }
    }
    Ok(out)
}

struct SkillGraph<'a, B: ?Sized> {
    task: &'a TaskSpec,
    skills: &'a [SkillId],
    backend: &'a B,
    cfg: &'a PlannerConfig,
    geom: &'a Geometry,
    rng: ChaCha8Rng,
}

impl<B: EffectBackend + ?Sized> SearchProblem for SkillGraph<'_, B> {
    type State = WorldState;
    type Action = SkillParams;
    type Key = Vec<i64>;

    fn is_goal(&self, s: &WorldState) -> bool {
        goal_satisfied(s, self.task, self.geom)
    }

    fn heuristic(&self, s: &WorldState) -> f64 {
        heuristic(s, self.task, self.geom)
    }

    fn key(&self, s: &WorldState) -> Vec<i64> {
        s.quantized_key(self.cfg.duplicate_quantum)
    }

    fn successors(&mut self, s: &WorldState) -> Result<Vec<Successor>> {
        expand(s, self.skills, self.backend, self.cfg, self.geom, &mut self.rng)
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub outcome: Outcome,
    pub plan: Option<Plan>,
    pub expansions: usize,
    pub generated: usize,
    pub elapsed: Duration,
    /// Open node ids at termination, ascending.
    pub open: Vec<usize>,
    pub graph: SearchGraph<WorldState, SkillParams>,
}

impl SearchResult {
    pub fn solved(&self) -> bool {
        self.outcome == Outcome::Solved
    }

    /// The root-to-node path of a graph node as a plan.
    pub fn plan_to(&self, node: usize) -> Plan {
        let steps = self
            .graph
            .trace(node)
            .into_iter()
            .map(|(params, predicted_state, predicted_cost)| PlanStep {
                skill: params.skill(),
                params,
                predicted_state,
                predicted_cost,
            })
            .collect();
        Plan::new(steps)
    }
}

fn run<B: EffectBackend + ?Sized>(
    start: &WorldState,
    task: &TaskSpec,
    skills: &[SkillId],
    backend: &B,
    cfg: &PlannerConfig,
    geom: &Geometry,
    seed: u64,
    random_order: bool,
) -> Result<SearchResult> {
    cfg.validate(skills)?;
    let mut problem = SkillGraph { task, skills, backend, cfg, geom, rng: ChaCha8Rng::seed_from_u64(seed) };
    let limits = SearchLimits {
        max_depth: cfg.max_depth,
        max_expansions: cfg.max_expansions,
        timeout: Duration::from_secs_f64(cfg.timeout_s),
    };
    let order = if random_order {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Order::Random(rng)
    } else {
        Order::Weighted { epsilon: cfg.epsilon }
    };
    let r = best_first(&mut problem, start.clone(), &limits, order)?;
    let mut result = SearchResult {
        outcome: r.outcome,
        plan: None,
        expansions: r.expansions,
        generated: r.generated,
        elapsed: r.elapsed,
        open: r.open,
        graph: r.graph,
    };
    if let Some(goal) = r.goal {
        result.plan = Some(result.plan_to(goal));
    }
    Ok(result)
}

/// Weighted A* from `start`; `cfg.random_order` switches to the random baseline.
pub fn wastar<B: EffectBackend + ?Sized>(
    start: &WorldState,
    task: &TaskSpec,
    skills: &[SkillId],
    backend: &B,
    cfg: &PlannerConfig,
    geom: &Geometry,
    seed: u64,
) -> Result<SearchResult> {
    run(start, task, skills, backend, cfg, geom, seed, cfg.random_order)
}

/// Same search but expands a uniformly random open node each step.
pub fn random_order_search<B: EffectBackend + ?Sized>(
    start: &WorldState,
    task: &TaskSpec,
    skills: &[SkillId],
    backend: &B,
    cfg: &PlannerConfig,
    geom: &Geometry,
    seed: u64,
) -> Result<SearchResult> {
    run(start, task, skills, backend, cfg, geom, seed, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::{execute_plan, sample_initial_state, BlockFeature};

    fn gt() -> GroundTruthBackend {
        GroundTruthBackend::default()
    }

    #[test]
    fn expand_respects_branching() {
        let g = Geometry::default();
        let s = sample_initial_state(&g, &[3, 3], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = PlannerConfig::default();
        let succ = expand(&s, &[SkillId::PickPlace, SkillId::TraySweep], &gt(), &cfg, &g, &mut rng).unwrap();
        assert!(succ.len() <= 30 && !succ.is_empty());
        for (p, next, c) in &succ {
            let (want, wc) = apply(&s, p, &g).unwrap();
            assert_eq!(&want, next);
            assert_eq!(wc, *c);
        }
        // No tray blocks on a fresh state: sliding contributes nothing.
        let none = expand(&s, &[SkillId::TraySlide], &gt(), &cfg, &g, &mut rng).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn start_at_goal_gives_empty_plan() {
        let g = Geometry::default();
        let s = WorldState::new(vec![BlockFeature { position: [0.85, -0.15, g.bin_rest_z()], color: 0, index: 0 }]).unwrap();
        let task = TaskSpec::preset(TaskId::A);
        for random in [false, true] {
            let cfg = PlannerConfig { random_order: random, ..PlannerConfig::default() };
            let r = wastar(&s, &task, &[SkillId::PickPlace], &gt(), &cfg, &g, 0).unwrap();
            assert_eq!(r.outcome, Outcome::Solved);
            assert!(r.plan.unwrap().is_empty());
        }
    }

    #[test]
    fn zero_expansions_times_out() {
        let g = Geometry::default();
        let s = sample_initial_state(&g, &[3, 3], 2).unwrap();
        let cfg = PlannerConfig { max_expansions: 0, ..PlannerConfig::default() };
        let r = wastar(&s, &TaskSpec::preset(TaskId::A), &[SkillId::PickPlace], &gt(), &cfg, &g, 0).unwrap();
        assert_eq!(r.outcome, Outcome::Timeout);
        assert_eq!(r.expansions, 0);
    }

    #[test]
    fn solves_task_a_and_plan_executes() {
        let g = Geometry::default();
        let task = TaskSpec::preset(TaskId::A);
        let skills = [SkillId::PickPlace];
        let cfg = PlannerConfig::preset(TaskId::A, &skills);
        let s = sample_initial_state(&g, &[3, 3], 7).unwrap();
        let r = wastar(&s, &task, &skills, &gt(), &cfg, &g, 7).unwrap();
        assert_eq!(r.outcome, Outcome::Solved);
        let plan = r.plan.unwrap();
        let mut g_acc = 0.0;
        for (i, step) in plan.steps.iter().enumerate() {
            g_acc += step.predicted_cost;
            assert_eq!(goal_satisfied(&step.predicted_state, &task, &g), i + 1 == plan.len());
        }
        assert!((g_acc - plan.total_cost).abs() < 1e-12);
        let exec = execute_plan(&s, &plan, &task, &g);
        assert!(exec.success);
        assert!((exec.executed_cost - plan.total_cost).abs() < 1e-9);
    }

    #[test]
    fn search_is_deterministic() {
        let g = Geometry::default();
        let task = TaskSpec::preset(TaskId::B);
        let skills = [SkillId::PickPlace];
        let cfg = PlannerConfig::preset(TaskId::B, &skills);
        let s = sample_initial_state(&g, &[3, 3], 11).unwrap();
        let a = wastar(&s, &task, &skills, &gt(), &cfg, &g, 5).unwrap();
        let b = wastar(&s, &task, &skills, &gt(), &cfg, &g, 5).unwrap();
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(a.plan, b.plan);
        assert_eq!(a.expansions, b.expansions);
        assert_eq!(a.open, b.open);
    }

    #[test]
    fn far_bin_unreachable_with_pick_place() {
        let g = Geometry::default();
        let task = TaskSpec::preset(TaskId::C);
        let skills = [SkillId::PickPlace];
        let cfg = PlannerConfig { max_expansions: 200, ..PlannerConfig::preset(TaskId::C, &skills) };
        let s = sample_initial_state(&g, &[3, 3], 3).unwrap();
        let r = wastar(&s, &task, &skills, &gt(), &cfg, &g, 3).unwrap();
        assert_ne!(r.outcome, Outcome::Solved);
        assert!(r.plan.is_none());
    }
}
