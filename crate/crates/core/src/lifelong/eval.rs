use super::config::{derive_seed, LifelongConfig, SeedTag};
use super::metrics::{weighted_cost, EvalRow};
use crate::error::{Error, Result};
use crate::planner::{wastar, EffectBackend, TaskId, TaskSpec};
use crate::worldsim::{execute_plan, sample_initial_state, Geometry, Plan, SkillId, WorldState};

/// One plan-once-then-execute attempt.
#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub start: WorldState,
    pub plan: Option<Plan>,
    pub success: bool,
    pub executed_cost: f64,
    pub expansions: usize,
    pub plan_time_ms: f64,
}

pub fn run_trial<B: EffectBackend + ?Sized>(
    task: TaskId,
    backend: &B,
    skills: &[SkillId],
    cfg: &LifelongConfig,
    round: u32,
    trial: usize,
    geom: &Geometry,
) -> Result<Trial> {
    let key = [round as u64, task as u64, trial as u64];
    let start = sample_initial_state(geom, &cfg.counts, derive_seed(cfg.seed, SeedTag::EvalState, &key))?;
    let spec = TaskSpec::preset(task);
    let pcfg = cfg.planner_config(task, skills);
    let r = wastar(&start, &spec, skills, backend, &pcfg, geom, derive_seed(cfg.seed, SeedTag::EvalPlan, &key))?;
    let plan_time_ms = if cfg.record_timings { r.elapsed.as_secs_f64() * 1e3 } else { 0.0 };
    let (success, executed_cost) = match &r.plan {
        Some(p) => {
            let ex = execute_plan(&start, p, &spec, geom);
            (ex.success, ex.executed_cost)
        }
        None => (false, 0.0),
    };
    Ok(Trial { start, plan: r.plan, success, executed_cost, expansions: r.expansions, plan_time_ms })
}

/// Aggregates trials of one task into a metrics row.
pub fn summarize(round: u32, task: TaskId, n_skills: usize, trials: &[Trial], new_skills: &[SkillId]) -> EvalRow {
    let n = trials.len().max(1) as f64;
    let wins: Vec<&Trial> = trials.iter().filter(|t| t.success).collect();
    let success_rate = wins.len() as f64 / n;
    let mean_cost = if wins.is_empty() {
        f64::NAN
    } else {
        wins.iter().map(|t| t.executed_cost).sum::<f64>() / wins.len() as f64
    };
    let uses_new = wins
        .iter()
        .filter(|t| t.plan.as_ref().is_some_and(|p| new_skills.iter().any(|k| p.uses_skill(*k))))
        .count();
    EvalRow {
        round,
        task,
        n_skills,
        success_rate,
        mean_cost,
        weighted_cost: weighted_cost(mean_cost, success_rate),
        plan_time_ms: trials.iter().map(|t| t.plan_time_ms).sum::<f64>() / n,
        expansions: trials.iter().map(|t| t.expansions as f64).sum::<f64>() / n,
        new_skill_plan_rate: uses_new as f64 / n,
    }
}

/// Plans once per trial with `backend` and executes on the simulator.
pub fn evaluate<B: EffectBackend + ?Sized>(
    tasks: &[TaskId],
    backend: &B,
    skills: &[SkillId],
    new_skills: &[SkillId],
    cfg: &LifelongConfig,
    round: u32,
    geom: &Geometry,
) -> Result<Vec<EvalRow>> {
    if cfg.eval_trials == 0 {
        return Err(Error::config("eval_trials must be at least 1"));
    }
    tasks
        .iter()
        .map(|&task| {
            let trials = (0..cfg.eval_trials)
                .map(|i| run_trial(task, backend, skills, cfg, round, i, geom))
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize(round, task, skills.len(), &trials, new_skills))
        })
        .collect()
}
