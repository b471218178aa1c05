use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bootstrap::{bootstrap_skill, needs_augmentation};
use super::config::{derive_seed, LifelongConfig, SeedTag};
use super::dataset::{Provenance, SkillDataset, TransitionRecord};
use super::eval::evaluate;
use super::metrics::{append_metrics, EvalRow};
use crate::error::{Error, Result};
use crate::planner::{extract_weighted_paths, wastar, TaskId, TaskSpec};
use crate::sem::{save_checkpoint, train, SemBackend, SemModel};
use crate::worldsim::{apply, execute_plan, sample_initial_state, sample_params, Geometry, SkillId};

/// Effect models and their datasets.
#[derive(Clone, Debug, Default)]
pub struct Learner {
    pub sem: SemBackend,
    pub datasets: BTreeMap<SkillId, SkillDataset>,
}

/// What one collection round did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoundReport {
    pub round: u32,
    pub problems: usize,
    pub solved: usize,
    pub paths: usize,
    /// New (deduplicated) records per skill.
    pub added: BTreeMap<SkillId, usize>,
    /// Last-epoch training loss per skill.
    pub losses: BTreeMap<SkillId, f64>,
}

impl RoundReport {
    pub fn total_added(&self) -> usize {
        self.added.values().sum()
    }
}

impl Learner {
    pub fn skills(&self) -> Vec<SkillId> {
        self.sem.models.keys().copied().collect()
    }

    pub fn model(&self, skill: SkillId) -> Option<&SemModel> {
        self.sem.models.get(&skill)
    }

    pub fn dataset_sizes(&self) -> BTreeMap<SkillId, usize> {
        self.datasets.iter().map(|(k, d)| (*k, d.len())).collect()
    }

    /// Bootstraps and trains a model for a skill that has none yet.
    pub fn add_skill(&mut self, skill: SkillId, cfg: &LifelongConfig, geom: &Geometry) -> Result<()> {
        if self.sem.models.contains_key(&skill) {
            return Err(Error::config(format!("{skill} was already added")));
        }
        let ds = bootstrap_skill(
            skill,
            geom,
            &cfg.counts,
            cfg.m0,
            cfg.p0,
            needs_augmentation(skill),
            derive_seed(cfg.seed, SeedTag::Bootstrap, &[skill as u64]),
        )?;
        let mut model = SemModel::new(skill, derive_seed(cfg.seed, SeedTag::ModelInit, &[skill as u64]));
        if !ds.is_empty() && cfg.bootstrap_epochs > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SeedTag::Bootstrap, &[skill as u64, 1]));
            let rep = train(&mut model, ds.records(), &cfg.train_config(cfg.bootstrap_epochs), &mut rng)?;
            info!("bootstrapped {skill} on {} transitions, loss {:.5}", ds.len(), rep.last().unwrap_or(f64::NAN));
        }
        self.sem.models.insert(skill, model);
        self.datasets.insert(skill, ds);
        Ok(())
    }

    /// Inserts records in order and counts the new ones per skill.
    pub fn insert(&mut self, records: Vec<TransitionRecord>) -> Result<BTreeMap<SkillId, usize>> {
        let mut added = BTreeMap::new();
        for r in records {
            let skill = r.skill;
            let ds = self
                .datasets
                .get_mut(&skill)
                .ok_or_else(|| Error::contract(format!("no dataset for {skill}")))?;
            if ds.insert(r)? {
                *added.entry(skill).or_insert(0) += 1;
            }
        }
        Ok(added)
    }

    /// Fine-tunes every model with data for `epochs` epochs.
    pub fn train_all(&mut self, cfg: &LifelongConfig, round: u32, epochs: usize) -> Result<BTreeMap<SkillId, f64>> {
        let mut losses = BTreeMap::new();
        if epochs == 0 {
            return Ok(losses);
        }
        for (skill, model) in self.sem.models.iter_mut() {
            let ds = &self.datasets[skill];
            if ds.is_empty() {
                warn!("round {round}: no data for {skill}, model left unchanged");
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SeedTag::Train, &[round as u64, *skill as u64]));
            let rep = train(model, ds.records(), &cfg.train_config(epochs), &mut rng)?;
            losses.insert(*skill, rep.last().unwrap_or(f64::NAN));
        }
        Ok(losses)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("models"))?;
        fs::create_dir_all(dir.join("datasets"))?;
        for (skill, model) in &self.sem.models {
            save_checkpoint(model, &dir.join("models").join(format!("{skill}.json")))?;
        }
        for (skill, ds) in &self.datasets {
            ds.save_jsonl(&dir.join("datasets").join(format!("{skill}.jsonl")))?;
        }
        Ok(())
    }
}

/// Plans on the train tasks with the current models and executes sampled
/// open-list paths on the simulator, keeping each path up to its first
/// failed precondition.
pub fn collect_planner_data(
    learner: &Learner,
    tasks: &[TaskId],
    cfg: &LifelongConfig,
    round: u32,
    geom: &Geometry,
) -> Result<(Vec<TransitionRecord>, RoundReport)> {
    let skills = learner.skills();
    let new_skills = cfg.new_skills_at(round);
    let mut report = RoundReport { round, ..Default::default() };
    let mut records = Vec::new();
    for &task in tasks {
        let spec = TaskSpec::preset(task);
        let pcfg = cfg.planner_config(task, &skills);
        for i in 0..cfg.mp {
            let key = [round as u64, task as u64, i as u64];
            let start = sample_initial_state(geom, &cfg.counts, derive_seed(cfg.seed, SeedTag::CollectState, &key))?;
            let r = wastar(&start, &spec, &skills, &learner.sem, &pcfg, geom, derive_seed(cfg.seed, SeedTag::CollectPlan, &key))?;
            report.problems += 1;
            report.solved += r.solved() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SeedTag::PathSample, &key));
            for path in extract_weighted_paths(&r, &new_skills, cfg.n_l, cfg.n_s, &mut rng) {
                report.paths += 1;
                let mut x0 = start.clone();
                for (theta, xt, cost) in execute_plan(&start, &path, &spec, geom).transitions {
                    records.push(TransitionRecord::new(x0, theta, xt.clone(), cost, Provenance::Planner { task, round })?);
                    x0 = xt;
                }
            }
        }
    }
    Ok((records, report))
}

/// Random skill sequences from fresh initial states until `budget` new
/// records were added or the walk limit is hit.
pub fn collect_random_data(
    learner: &mut Learner,
    cfg: &LifelongConfig,
    round: u32,
    budget: usize,
    max_steps: usize,
    geom: &Geometry,
) -> Result<BTreeMap<SkillId, usize>> {
    let skills = learner.skills();
    let mut added: BTreeMap<SkillId, usize> = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SeedTag::Random, &[round as u64]));
    let max_walks = 100 * budget.max(1);
    let mut walk = 0;
    while added.values().sum::<usize>() < budget && walk < max_walks {
        let mut state = sample_initial_state(geom, &cfg.counts, derive_seed(cfg.seed, SeedTag::Random, &[round as u64, walk as u64 + 1]))?;
        walk += 1;
        for _ in 0..max_steps {
            let mut order = skills.clone();
            order.shuffle(&mut rng);
            let Some(theta) = order.iter().find_map(|&k| sample_params(k, &state, geom, &mut rng, 1).pop()) else {
                break;
            };
            let (next, cost) = apply(&state, &theta, geom)?;
            let rec = TransitionRecord::new(state, theta, next.clone(), cost, Provenance::Random { round })?;
            for (k, n) in learner.insert(vec![rec])? {
                *added.entry(k).or_insert(0) += n;
            }
            state = next;
            if added.values().sum::<usize>() >= budget {
                break;
            }
        }
    }
    Ok(added)
}

/// One pass of plan, collect, fine-tune over the train tasks.
pub fn iterative_round(learner: &mut Learner, cfg: &LifelongConfig, round: u32, geom: &Geometry) -> Result<RoundReport> {
    let (records, mut report) = collect_planner_data(learner, &cfg.train_tasks, cfg, round, geom)?;
    report.added = learner.insert(records)?;
    report.losses = learner.train_all(cfg, round, cfg.epochs)?;
    Ok(report)
}

/// Adds the skills scheduled for `round` (bootstrapping each).
pub fn add_scheduled(learner: &mut Learner, cfg: &LifelongConfig, round: u32, geom: &Geometry) -> Result<Vec<SkillId>> {
    let added = cfg.schedule.get(&round).cloned().unwrap_or_default();
    for &k in &added {
        learner.add_skill(k, cfg, geom)?;
    }
    Ok(added)
}

/// Everything produced by one lifelong round.
pub struct RoundOutput<'a> {
    pub round: u32,
    pub skills: Vec<SkillId>,
    pub report: RoundReport,
    pub evals: Vec<EvalRow>,
    pub learner: &'a Learner,
}

/// Runs every round, calling `on_round` after each evaluation.
pub fn run_lifelong_with(
    cfg: &LifelongConfig,
    geom: &Geometry,
    mut on_round: impl FnMut(&RoundOutput) -> Result<()>,
) -> Result<Learner> {
    cfg.validate()?;
    geom.validate()?;
    let mut learner = Learner::default();
    let tasks = cfg.all_tasks();
    for round in 0..cfg.rounds {
        let added = add_scheduled(&mut learner, cfg, round, geom)?;
        if !added.is_empty() {
            info!("round {round}: added {:?}", added);
        }
        let report = iterative_round(&mut learner, cfg, round, geom)?;
        let skills = learner.skills();
        let evals = evaluate(&tasks, &learner.sem, &skills, &cfg.new_skills_at(round), cfg, round, geom)?;
        for e in &evals {
            info!(
                "round {round} task {}: success {:.2} cost {:.3} expansions {:.0}",
                e.task, e.success_rate, e.mean_cost, e.expansions
            );
        }
        on_round(&RoundOutput { round, skills, report, evals, learner: &learner })?;
    }
    Ok(learner)
}

/// Runs the loop and, when `out_dir` is given, rewrites `metrics.csv` and
/// appends to it after every round along with model and dataset snapshots.
pub fn run_lifelong(cfg: &LifelongConfig, geom: &Geometry, out_dir: Option<&Path>) -> Result<(Learner, Vec<EvalRow>)> {
    let mut rows = Vec::new();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let metrics = dir.join("metrics.csv");
        if metrics.exists() {
            fs::remove_file(&metrics)?;
        }
    }
    let learner = run_lifelong_with(cfg, geom, |out| {
        if let Some(dir) = out_dir {
            append_metrics(&dir.join("metrics.csv"), &out.evals)?;
            out.learner.save(dir)?;
        }
        rows.extend(out.evals.iter().cloned());
        Ok(())
    })?;
    Ok((learner, rows))
}
