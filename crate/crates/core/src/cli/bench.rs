//! Benchmarks: backend plan times, plan time against skill count, guided
//! against random-order search, and planner against random training data.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lifelong::{
    collect_random_data, derive_seed, evaluate, iterative_round, Learner, LifelongConfig, SeedTag,
};
use crate::planner::{random_order_search, wastar, EffectBackend, GroundTruthBackend, PlannerConfig, TaskId, TaskSpec};
use crate::worldsim::{execute_plan, sample_initial_state, Geometry, SkillId};

/// Outcome of one search from one start state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchStat {
    pub seed: u64,
    pub solved: bool,
    /// Expansions until the first solution; infinite when unsolved.
    pub expansions: f64,
    /// Executed cost of the plan; infinite when unsolved or failing.
    pub cost: f64,
    pub plan_time_ms: f64,
}

fn search_stat<B: EffectBackend + ?Sized>(
    task: TaskId,
    skills: &[SkillId],
    backend: &B,
    pcfg: &PlannerConfig,
    cfg: &LifelongConfig,
    geom: &Geometry,
    seed: u64,
    random_order: bool,
) -> Result<SearchStat> {
    let start = sample_initial_state(geom, &cfg.counts, derive_seed(cfg.seed, SeedTag::EvalState, &[u64::MAX, task as u64, seed]))?;
    let spec = TaskSpec::preset(task);
    let plan_seed = derive_seed(cfg.seed, SeedTag::EvalPlan, &[u64::MAX, task as u64, seed]);
    let r = if random_order {
        random_order_search(&start, &spec, skills, backend, pcfg, geom, plan_seed)?
    } else {
        wastar(&start, &spec, skills, backend, pcfg, geom, plan_seed)?
    };
    let executed = r.plan.as_ref().map(|p| execute_plan(&start, p, &spec, geom));
    let solved = executed.as_ref().is_some_and(|e| e.success);
    Ok(SearchStat {
        seed,
        solved,
        expansions: if r.solved() { r.expansions as f64 } else { f64::INFINITY },
        cost: if solved { executed.map_or(f64::INFINITY, |e| e.executed_cost) } else { f64::INFINITY },
        plan_time_ms: r.elapsed.as_secs_f64() * 1e3,
    })
}

/// Median with infinite entries standing for censored runs.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        let (a, b) = (v[n / 2 - 1], v[n / 2]);
        if a.is_infinite() || b.is_infinite() {
            b
        } else {
            0.5 * (a + b)
        }
    }
}

/// Mean plan time and expansions of one backend on one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub backend: String,
    pub task: TaskId,
    pub n_skills: usize,
    pub trials: usize,
    pub success_rate: f64,
    /// Over all trials, including ones that ran out of budget.
    pub mean_plan_time_ms: f64,
    /// Over trials where the search found a plan.
    pub mean_expansions: f64,
}

pub fn time_backend<B: EffectBackend + ?Sized>(
    name: &str,
    backend: &B,
    task: TaskId,
    skills: &[SkillId],
    cfg: &LifelongConfig,
    geom: &Geometry,
    trials: usize,
) -> Result<TimingRow> {
    let pcfg = cfg.planner_config(task, skills);
    let mut stats = Vec::with_capacity(trials);
    for t in 0..trials {
        stats.push(search_stat(task, skills, backend, &pcfg, cfg, geom, t as u64, false)?);
    }
    let n = trials.max(1) as f64;
    Ok(TimingRow {
        backend: name.to_string(),
        task,
        n_skills: skills.len(),
        trials,
        success_rate: stats.iter().filter(|s| s.solved).count() as f64 / n,
        mean_plan_time_ms: stats.iter().map(|s| s.plan_time_ms).sum::<f64>() / n,
        mean_expansions: {
            let solved: Vec<f64> = stats.iter().map(|s| s.expansions).filter(|e| e.is_finite()).collect();
            if solved.is_empty() { f64::NAN } else { solved.iter().sum::<f64>() / solved.len() as f64 }
        },
    })
}

/// Plan times with the first `k` scheduled skills for every `k`.
pub fn skill_count_sweep<B: EffectBackend + ?Sized>(
    name: &str,
    backend: &B,
    tasks: &[TaskId],
    cfg: &LifelongConfig,
    geom: &Geometry,
    trials: usize,
) -> Result<Vec<TimingRow>> {
    let order: Vec<SkillId> = cfg.skills_at(u32::MAX);
    let mut rows = Vec::new();
    for k in 1..=order.len() {
        for &task in tasks {
            rows.push(time_backend(name, backend, task, &order[..k], cfg, geom, trials)?);
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidedVsRandom {
    pub task: TaskId,
    pub skills: Vec<SkillId>,
    pub budget: usize,
    pub guided: Vec<SearchStat>,
    pub random: Vec<SearchStat>,
    pub guided_median_expansions: f64,
    pub random_median_expansions: f64,
    pub guided_median_cost: f64,
    pub random_median_cost: f64,
}

/// WA* against random-order expansion on the ground-truth backend.
/// Unsolved runs count as infinitely many expansions and infinite cost.
pub fn guided_vs_random(
    task: TaskId,
    skills: &[SkillId],
    cfg: &LifelongConfig,
    geom: &Geometry,
    seeds: usize,
    budget: usize,
) -> Result<GuidedVsRandom> {
    let backend = GroundTruthBackend::new(geom.clone());
    let mut pcfg = cfg.planner_config(task, skills);
    pcfg.max_expansions = budget;
    pcfg.timeout_s = pcfg.timeout_s.max(600.0);
    let mut guided = Vec::with_capacity(seeds);
    let mut random = Vec::with_capacity(seeds);
    for s in 0..seeds as u64 {
        guided.push(search_stat(task, skills, &backend, &pcfg, cfg, geom, s, false)?);
        random.push(search_stat(task, skills, &backend, &pcfg, cfg, geom, s, true)?);
    }
    let med = |v: &[SearchStat], f: fn(&SearchStat) -> f64| median(&v.iter().map(f).collect::<Vec<_>>());
    Ok(GuidedVsRandom {
        task,
        skills: skills.to_vec(),
        budget,
        guided_median_expansions: med(&guided, |s| s.expansions),
        random_median_expansions: med(&random, |s| s.expansions),
        guided_median_cost: med(&guided, |s| s.cost),
        random_median_cost: med(&random, |s| s.cost),
        guided,
        random,
    })
}

/// Success on the evaluation task after each collection round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub round: u32,
    /// Transitions added so far (equal for both learners).
    pub budget: usize,
    pub planner_success: f64,
    pub random_success: f64,
    pub planner_cost: f64,
    pub random_cost: f64,
}

/// Two learners share a bootstrap; one then trains on planner-collected data
/// from `cfg.train_tasks`, the other on as many random transitions.
pub fn planner_vs_random_data(
    skills: &[SkillId],
    eval_task: TaskId,
    cfg: &LifelongConfig,
    geom: &Geometry,
    rounds: u32,
) -> Result<Vec<DataRow>> {
    let mut planner = Learner::default();
    for &k in skills {
        planner.add_skill(k, cfg, geom)?;
    }
    let mut random = planner.clone();
    let mut budget = 0;
    let mut rows = Vec::new();
    for round in 0..rounds {
        let report = iterative_round(&mut planner, cfg, round, geom)?;
        let n = report.total_added();
        let added = collect_random_data(&mut random, cfg, round, n, 8, geom)?;
        random.train_all(cfg, round, cfg.epochs)?;
        budget += n;
        log::info!("data round {round}: {n} planner and {} random transitions", added.values().sum::<usize>());
        let p = evaluate(&[eval_task], &planner.sem, skills, &[], cfg, round, geom)?.remove(0);
        let r = evaluate(&[eval_task], &random.sem, skills, &[], cfg, round, geom)?.remove(0);
        rows.push(DataRow {
            round,
            budget,
            planner_success: p.success_rate,
            random_success: r.success_rate,
            planner_cost: p.mean_cost,
            random_cost: r.mean_cost,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_with_censoring() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
        assert_eq!(median(&[1.0, f64::INFINITY, f64::INFINITY]), f64::INFINITY);
        assert_eq!(median(&[1.0, 2.0, f64::INFINITY, f64::INFINITY]), f64::INFINITY);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn guided_search_small() {
        let cfg = LifelongConfig::default();
        let r = guided_vs_random(TaskId::B, &[SkillId::PickPlace], &cfg, &Geometry::default(), 2, 300).unwrap();
        assert_eq!(r.guided.len(), 2);
        assert!(r.guided.iter().all(|s| s.solved));
        assert!(r.random_median_expansions >= r.guided_median_expansions);
    }

    #[test]
    fn timing_row_counts() {
        let g = Geometry::default();
        let cfg = LifelongConfig::default();
        let row = time_backend("gt", &GroundTruthBackend::new(g.clone()), TaskId::A, &SkillId::ALL, &cfg, &g, 2).unwrap();
        assert_eq!(row.trials, 2);
        assert_eq!(row.success_rate, 1.0);
        assert!(row.mean_expansions >= 1.0);
    }
}
