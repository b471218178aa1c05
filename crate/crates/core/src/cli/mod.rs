//! Command-line front end. `run` parses arguments, dispatches and maps
//! errors to exit codes: 0 success, 1 runtime failure, 2 usage or
//! configuration error.

pub mod bench;
mod config;
pub mod plot;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{commented_default, BackendKind, Manifest, RunConfig};

use crate::error::{Error, Result};
use crate::lifelong::{append_metrics, evaluate, EvalRow, Learner, LifelongConfig};
use crate::planner::{format_trace, wastar, EffectBackend, GroundTruthBackend, TaskId, TaskSpec};
use crate::sem::{load_checkpoint, SemBackend};
use crate::theory::run_theory;
use crate::worldsim::{execute_plan, parse_skill_list, sample_initial_state, Geometry, SkillId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "semplan", version, about = "Task planning with learned skill-effect models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// JSON run configuration (comments allowed).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
struct Planning {
    /// Comma separated skills, e.g. pick_place,tray_slide.
    // The full path keeps clap from treating the list as repeated values.
    #[arg(long, value_parser = parse_skills)]
    skills: Option<::std::vec::Vec<SkillId>>,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Directory with `<skill>.json` checkpoints; defaults to `<out>/models`.
    #[arg(long)]
    models: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the default configuration with comments.
    InitConfig {
        #[arg(default_value = "config.json")]
        path: PathBuf,
    },
    /// Bootstrap and train effect models for the given skills.
    Bootstrap {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_skills)]
        skills: Option<::std::vec::Vec<SkillId>>,
    },
    /// Run the lifelong plan, collect, train loop.
    Lifelong {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rounds: Option<u32>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
    },
    /// Plan once and print the trace.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_task)]
        task: TaskId,
        #[command(flatten)]
        planning: Planning,
    },
    /// Plan and execute repeatedly, printing metrics rows.
    Eval {
        #[command(flatten)]
        common: Common,
        /// A single task; all configured tasks when omitted.
        #[arg(long, value_parser = parse_task)]
        task: Option<TaskId>,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        planning: Planning,
    },
    /// Benchmarks: (a) backend timing, (b) skill count, (c) guided vs random search, (d) planner vs random data.
    Bench {
        #[arg(value_enum)]
        which: BenchKind,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        rounds: Option<u32>,
        #[command(flatten)]
        planning: Planning,
    },
    /// Dispersion, Lipschitz and bound checks.
    Theory {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Render metrics columns to an SVG chart.
    Plot {
        #[command(flatten)]
        common: Common,
        /// Metrics CSV; defaults to `<out>/metrics.csv`.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "success_rate,new_skill_plan_rate")]
        columns: Vec<String>,
        /// Output SVG; defaults to `<out>/plots/<first column>.svg`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BenchKind {
    A,
    B,
    C,
    D,
}

fn parse_skills(s: &str) -> std::result::Result<Vec<SkillId>, String> {
    parse_skill_list(s).map_err(|e| e.to_string())
}

fn parse_task(s: &str) -> std::result::Result<TaskId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exit code for an error: configuration problems are usage errors.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Capacity { .. } => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_models(dir: &Path, skills: &[SkillId]) -> Result<SemBackend> {
    let mut models = Vec::new();
    for k in skills {
        let path = dir.join(format!("{k}.json"));
        if !path.exists() {
            return Err(Error::Checkpoint(format!("no model for {k} at {}", path.display())));
        }
        models.push(load_checkpoint(&path)?);
    }
    Ok(SemBackend::new(models))
}

/// Backend chosen by the flags or the configuration.
fn backend_for(cfg: &RunConfig, planning: &Planning, skills: &[SkillId]) -> Result<Box<dyn EffectBackend>> {
    Ok(match planning.backend.unwrap_or(cfg.backend) {
        BackendKind::GroundTruth => Box::new(GroundTruthBackend::new(cfg.geometry.clone())),
        BackendKind::Sem => {
            let dir = planning.models.clone().unwrap_or_else(|| cfg.out_dir.join("models"));
            Box::new(load_models(&dir, skills)?)
        }
    })
}

fn skills_or_schedule(cfg: &LifelongConfig, skills: &Option<Vec<SkillId>>) -> Vec<SkillId> {
    skills.clone().unwrap_or_else(|| cfg.skills_at(u32::MAX))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn fmt_rows(rows: &[EvalRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).map_err(|e| Error::contract(e.to_string()))
}

/// Schedule rounds after the first, drawn as markers on charts.
pub fn schedule_markers(cfg: &LifelongConfig) -> Vec<u32> {
    cfg.schedule.keys().copied().filter(|r| *r > 0).collect()
}

/// Success and cost charts for a metrics file.
pub fn render_default_plots(dir: &Path, cfg: &LifelongConfig) -> Result<()> {
    let csv = dir.join("metrics.csv");
    let markers = schedule_markers(cfg);
    let plots = dir.join("plots");
    plot::render_curves(&csv, &["success_rate".into(), "new_skill_plan_rate".into()], &markers, &plots.join("success_rate.svg"))?;
    plot::render_curves(&csv, &["mean_cost".into()], &markers, &plots.join("mean_cost.svg"))?;
    plot::render_curves(&csv, &["weighted_cost".into()], &markers, &plots.join("weighted_cost.svg"))?;
    Ok(())
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::InitConfig { path } => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&path, commented_default()?)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        Command::Bootstrap { common, skills } => {
            let cfg = load_config(&common)?;
            let lcfg = cfg.lifelong();
            let skills = skills_or_schedule(&lcfg, &skills);
            let mut learner = Learner::default();
            for &k in &skills {
                learner.add_skill(k, &lcfg, &cfg.geometry)?;
                writeln!(out, "{k}: {} transitions", learner.datasets[&k].len())?;
            }
            learner.save(&cfg.out_dir)?;
            Manifest::new("bootstrap", &cfg)?.write(&cfg.out_dir)?;
        }
        Command::Lifelong { common, rounds, trials, backend } => {
            let mut cfg = load_config(&common)?;
            if let Some(r) = rounds {
                cfg.lifelong.rounds = r;
                cfg.lifelong.schedule.retain(|k, _| *k < r.max(1));
            }
            if let Some(t) = trials {
                cfg.lifelong.eval_trials = t;
            }
            if let Some(b) = backend {
                cfg.backend = b;
            }
            cfg.validate()?;
            let lcfg = cfg.lifelong();
            let dir = cfg.out_dir.clone();
            Manifest::new("lifelong", &cfg)?.write(&dir)?;
            match cfg.backend {
                BackendKind::Sem => {
                    crate::lifelong::run_lifelong_with(&lcfg, &cfg.geometry, |o| {
                        append_or_create(&dir, o.round, &o.evals)?;
                        o.learner.save(&dir)?;
                        for e in &o.evals {
                            writeln!(out, "round {:>3} task {} success {:.2} cost {:.3}", e.round, e.task, e.success_rate, e.mean_cost)?;
                        }
                        Ok(())
                    })?;
                }
                BackendKind::GroundTruth => {
                    let gt = GroundTruthBackend::new(cfg.geometry.clone());
                    for round in 0..lcfg.rounds {
                        let skills = lcfg.skills_at(round);
                        let rows = evaluate(&lcfg.all_tasks(), &gt, &skills, &lcfg.new_skills_at(round), &lcfg, round, &cfg.geometry)?;
                        append_or_create(&dir, round, &rows)?;
                        for e in &rows {
                            writeln!(out, "round {:>3} task {} success {:.2} cost {:.3}", e.round, e.task, e.success_rate, e.mean_cost)?;
                        }
                    }
                }
            }
            render_default_plots(&dir, &lcfg)?;
        }
        Command::Plan { common, task, planning } => {
            let cfg = load_config(&common)?;
            let lcfg = cfg.lifelong();
            let skills = skills_or_schedule(&lcfg, &planning.skills);
            let backend = backend_for(&cfg, &planning, &skills)?;
            let start = sample_initial_state(&cfg.geometry, &lcfg.counts, cfg.seed)?;
            let spec = TaskSpec::preset(task);
            let pcfg = lcfg.planner_config(task, &skills);
            let r = wastar(&start, &spec, &skills, backend.as_ref(), &pcfg, &cfg.geometry, cfg.seed)?;
            writeln!(out, "task {task} with {}", skills.iter().map(|k| k.name()).collect::<Vec<_>>().join(","))?;
            writeln!(out, "start: {}", start.region_summary(&cfg.geometry))?;
            writeln!(out, "outcome: {:?} after {} expansions", r.outcome, r.expansions)?;
            match &r.plan {
                Some(p) => {
                    write!(out, "{}", format_trace(p, &cfg.geometry))?;
                    let ex = execute_plan(&start, p, &spec, &cfg.geometry);
                    writeln!(out, "executed: success={} cost={:.3}", ex.success, ex.executed_cost)?;
                }
                None => writeln!(out, "no plan found")?,
            }
        }
        Command::Eval { common, task, trials, planning } => {
            let cfg = load_config(&common)?;
            let mut lcfg = cfg.lifelong();
            if let Some(t) = trials {
                lcfg.eval_trials = t;
            }
            let skills = skills_or_schedule(&lcfg, &planning.skills);
            let backend = backend_for(&cfg, &planning, &skills)?;
            let tasks = task.map(|t| vec![t]).unwrap_or_else(|| lcfg.all_tasks());
            let rows = evaluate(&tasks, backend.as_ref(), &skills, &[], &lcfg, 0, &cfg.geometry)?;
            write!(out, "{}", fmt_rows(&rows)?)?;
            if common.out.is_some() {
                fs::create_dir_all(&cfg.out_dir)?;
                append_metrics(&cfg.out_dir.join("eval.csv"), &rows)?;
            }
        }
        Command::Bench { which, common, trials, rounds, planning } => {
            let cfg = load_config(&common)?;
            let lcfg = cfg.lifelong();
            bench_command(which, &cfg, &lcfg, trials, rounds, &planning, out)?;
        }
        Command::Theory { common, trials } => {
            let mut cfg = load_config(&common)?;
            if let Some(t) = trials {
                cfg.theory.bounds.trials = t;
            }
            let report = run_theory(&cfg.theory(), &cfg.geometry)?;
            writeln!(out, "K = {:.4}, L = {:.4} from {} pairs (inflation {})", report.lipschitz.k_hat, report.lipschitz.l_hat, report.lipschitz.pairs, report.lipschitz.inflation)?;
            for r in report.state.iter().chain(&report.cost) {
                writeln!(
                    out,
                    "{:?} bound, N = {}: {} violations in {} trials ({} skipped)",
                    r.kind,
                    r.skills.len(),
                    r.violations,
                    r.per_trial.len(),
                    r.skipped
                )?;
            }
            write_json(&cfg.out_dir.join("theory.json"), &report)?;
            Manifest::new("theory", &cfg)?.write(&cfg.out_dir)?;
        }
        Command::Plot { common, metrics, columns, output } => {
            let cfg = load_config(&common)?;
            let csv = metrics.unwrap_or_else(|| cfg.out_dir.join("metrics.csv"));
            if !csv.exists() {
                return Err(Error::config(format!("no metrics file at {}", csv.display())));
            }
            let first = columns.first().cloned().unwrap_or_default();
            let svg = output.unwrap_or_else(|| cfg.out_dir.join("plots").join(format!("{first}.svg")));
            plot::render_curves(&csv, &columns, &schedule_markers(&cfg.lifelong), &svg)?;
            writeln!(out, "wrote {}", svg.display())?;
        }
    }
    Ok(())
}

/// Starts a fresh metrics file at round 0 and appends afterwards.
fn append_or_create(dir: &Path, round: u32, rows: &[EvalRow]) -> Result<()> {
    let path = dir.join("metrics.csv");
    if round == 0 && path.exists() {
        fs::remove_file(&path)?;
    }
    append_metrics(&path, rows)
}

fn bench_command(
    which: BenchKind,
    cfg: &RunConfig,
    lcfg: &LifelongConfig,
    trials: Option<usize>,
    rounds: Option<u32>,
    planning: &Planning,
    out: &mut dyn Write,
) -> Result<()> {
    let geom: &Geometry = &cfg.geometry;
    let trials = trials.unwrap_or(lcfg.eval_trials);
    let dir = &cfg.out_dir;
    match which {
        BenchKind::A => {
            let skills = skills_or_schedule(lcfg, &planning.skills);
            let dir_models = planning.models.clone().unwrap_or_else(|| dir.join("models"));
            let sem = if skills.iter().all(|k| dir_models.join(format!("{k}.json")).exists()) {
                load_models(&dir_models, &skills)?
            } else {
                writeln!(out, "no checkpoints in {}; bootstrapping models", dir_models.display())?;
                let mut l = Learner::default();
                for &k in &skills {
                    l.add_skill(k, lcfg, geom)?;
                }
                l.sem
            };
            let gt = GroundTruthBackend::new(geom.clone());
            let mut rows = Vec::new();
            for task in lcfg.all_tasks() {
                let s = bench::time_backend("sem", &sem, task, &skills, lcfg, geom, trials)?;
                let g = bench::time_backend("ground-truth", &gt, task, &skills, lcfg, geom, trials)?;
                writeln!(
                    out,
                    "task {task}: sem {:.1} ms ({:.0} exp), ground truth {:.1} ms ({:.0} exp), ratio {:.2}",
                    s.mean_plan_time_ms,
                    s.mean_expansions,
                    g.mean_plan_time_ms,
                    g.mean_expansions,
                    s.mean_plan_time_ms / g.mean_plan_time_ms
                )?;
                rows.push(s);
                rows.push(g);
            }
            write_json(&dir.join("bench_a.json"), &rows)?;
        }
        BenchKind::B => {
            let gt;
            let sem;
            let (name, backend): (&str, &dyn EffectBackend) = match planning.backend.unwrap_or(cfg.backend) {
                BackendKind::GroundTruth => {
                    gt = GroundTruthBackend::new(geom.clone());
                    ("ground-truth", &gt)
                }
                BackendKind::Sem => {
                    let d = planning.models.clone().unwrap_or_else(|| dir.join("models"));
                    sem = load_models(&d, &lcfg.skills_at(u32::MAX))?;
                    ("sem", &sem)
                }
            };
            let rows = bench::skill_count_sweep(name, backend, &lcfg.all_tasks(), lcfg, geom, trials)?;
            for r in &rows {
                writeln!(
                    out,
                    "{} skills, task {}: {:.1} ms, {:.0} expansions, success {:.2}",
                    r.n_skills, r.task, r.mean_plan_time_ms, r.mean_expansions, r.success_rate
                )?;
            }
            write_json(&dir.join("bench_b.json"), &rows)?;
        }
        BenchKind::C => {
            let skills = planning.skills.clone().unwrap_or_else(|| vec![SkillId::PickPlace, SkillId::TraySlide]);
            let r = bench::guided_vs_random(TaskId::A, &skills, lcfg, geom, trials, 20_000)?;
            writeln!(
                out,
                "median expansions: guided {} random {}; median cost: guided {:.3} random {:.3}",
                r.guided_median_expansions, r.random_median_expansions, r.guided_median_cost, r.random_median_cost
            )?;
            write_json(&dir.join("bench_c.json"), &r)?;
        }
        BenchKind::D => {
            let skills = planning.skills.clone().unwrap_or_else(|| vec![SkillId::PickPlace, SkillId::TraySlide]);
            let mut l = lcfg.clone();
            l.eval_trials = trials;
            let rows = bench::planner_vs_random_data(&skills, TaskId::B, &l, geom, rounds.unwrap_or(3))?;
            for r in &rows {
                writeln!(
                    out,
                    "budget {:>5}: planner data success {:.2}, random data success {:.2}",
                    r.budget, r.planner_success, r.random_success
                )?;
            }
            write_json(&dir.join("bench_d.json"), &rows)?;
        }
    }
    Manifest::new(&format!("bench {which:?}").to_lowercase(), cfg)?.write(dir)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut o = Vec::new();
        let mut e = Vec::new();
        let code = run(std::iter::once("semplan").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&["plan", "--task", "Z"]).0, EXIT_USAGE);
        assert_eq!(call(&["plan", "--task", "A", "--skills", "fly"]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn bad_config_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, "{ \"nonsense\": 1 }").unwrap();
        let (code, _, err) = call(&["theory", "--config", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_USAGE, "{err}");
        let missing = dir.path().join("missing.json");
        assert_eq!(call(&["theory", "--config", missing.to_str().unwrap()]).0, EXIT_USAGE);
    }

    #[test]
    fn missing_models_is_a_runtime_failure() {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, err) = call(&["plan", "--task", "A", "--skills", "pick_place", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code, EXIT_RUNTIME, "{err}");
    }

    #[test]
    fn plot_missing_column() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("m.csv");
        fs::write(&csv, "round,task,success_rate\n0,A,1.0\n").unwrap();
        let (code, _, _) = call(&["plot", "--metrics", csv.to_str().unwrap(), "--columns", "cost", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _, _) =
            call(&["plot", "--metrics", csv.to_str().unwrap(), "--columns", "success_rate", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
        assert!(dir.path().join("plots/success_rate.svg").exists());
    }
}
