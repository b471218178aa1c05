//! C interface to the planner and the learned skill-effect models.
//!
//! Every function returns a [`SemplanStatus`]. On failure the message is kept
//! per thread and can be read with [`semplan_last_error`]. Objects are opaque
//! handles owned by the caller and released with their `_free` function.
//! Strings handed out by the library are released with [`semplan_string_free`].
//! Structured values (skill parameters, states, plans) cross the boundary as JSON.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use semplan::error::Error;
use semplan::lifelong::LifelongConfig;
use semplan::planner::{wastar, EffectBackend, GroundTruthBackend, TaskId, TaskSpec};
use semplan::sem::{load_checkpoint, SemBackend, SemModel};
use semplan::worldsim::{apply, execute_plan, parse_skill_list, sample_initial_state, Geometry, SkillId, SkillParams, WorldState};
use serde::Serialize;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SemplanStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or an unknown task or skill name.
    Parse = 3,
    Contract = 4,
    Precondition = 5,
    Capacity = 6,
    Domain = 7,
    Training = 8,
    Expansion = 9,
    Config = 10,
    Checkpoint = 11,
    Io = 12,
    /// A Rust panic was caught at the boundary.
    Internal = 13,
}

/// A geometry and the block state inside it.
pub struct SemplanWorld {
    geometry: Geometry,
    state: WorldState,
}

/// One trained skill-effect model.
pub struct SemplanModel {
    model: SemModel,
}

/// A skill library together with the backend that predicts its effects.
pub struct SemplanPlanner {
    skills: Vec<SkillId>,
    backend: Box<dyn EffectBackend>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(SemplanStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Contract(_) => SemplanStatus::Contract,
            Error::Precondition { .. } => SemplanStatus::Precondition,
            Error::Capacity { .. } => SemplanStatus::Capacity,
            Error::Domain(_) => SemplanStatus::Domain,
            Error::Training(_) => SemplanStatus::Training,
            Error::Expansion(_) => SemplanStatus::Expansion,
            Error::Config(_) => SemplanStatus::Config,
            Error::Checkpoint(_) => SemplanStatus::Checkpoint,
            Error::Io(_) => SemplanStatus::Io,
            Error::Json(_) | Error::Csv(_) => SemplanStatus::Parse,
        };
        Fail(status, e.to_string())
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Self {
        Fail(SemplanStatus::Parse, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SemplanStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SemplanStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            SemplanStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SemplanStatus::NullArgument, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(SemplanStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

fn json_string<T: Serialize>(v: &T) -> Result<*mut c_char, Fail> {
    let s = serde_json::to_string(v)?;
    Ok(CString::new(s).map_err(|e| Fail(SemplanStatus::Internal, e.to_string()))?.into_raw())
}

fn parse_task(s: &str) -> Result<TaskId, Fail> {
    s.parse().map_err(|e: Error| Fail(SemplanStatus::Parse, e.to_string()))
}

fn parse_skills(s: &str) -> Result<Vec<SkillId>, Fail> {
    parse_skill_list(s).map_err(|e| Fail(SemplanStatus::Parse, e.to_string()))
}

/// Library version as a static string; never free it.
#[no_mangle]
pub extern "C" fn semplan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn semplan_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn semplan_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Samples a start state with `counts[c]` blocks of color `c` in the default
/// geometry.
///
/// # Safety
/// `counts` must point to `n_colors` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn semplan_world_sample(
    counts: *const usize,
    n_colors: usize,
    seed: u64,
    out: *mut *mut SemplanWorld,
) -> SemplanStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if counts.is_null() && n_colors > 0 {
            return Err(null("counts"));
        }
        let counts = if n_colors == 0 { &[][..] } else { std::slice::from_raw_parts(counts, n_colors) };
        let geometry = Geometry::default();
        let state = sample_initial_state(&geometry, counts, seed)?;
        *out = Box::into_raw(Box::new(SemplanWorld { geometry, state }));
        Ok(())
    })
}

/// Builds a world from a JSON state: a list of `[x, y, z, color, index]` rows.
///
/// # Safety
/// `state_json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn semplan_world_from_json(state_json: *const c_char, out: *mut *mut SemplanWorld) -> SemplanStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let state: WorldState = serde_json::from_str(str_arg(state_json, "state_json")?)?;
        *out = Box::into_raw(Box::new(SemplanWorld { geometry: Geometry::default(), state }));
        Ok(())
    })
}

/// # Safety
/// `world` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn semplan_world_block_count(world: *const SemplanWorld, out: *mut usize) -> SemplanStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(world, "world")?.state.len();
        Ok(())
    })
}

/// The state as JSON; free the string with [`semplan_string_free`].
///
/// # Safety
/// `world` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn semplan_world_to_json(world: *const SemplanWorld, out: *mut *mut c_char) -> SemplanStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = json_string(&ref_arg(world, "world")?.state)?;
        Ok(())
    })
}

/// Executes one skill in place and reports its cost. Skill parameters are
/// JSON such as `{"type":"tray_slide","bin_x":0.5}`. The state is unchanged on
/// failure.
///
/// # Safety
/// `world` must be a live handle, `params_json` a valid C string and
/// `cost` writable.
#[no_mangle]
pub unsafe extern "C" fn semplan_world_apply(
    world: *mut SemplanWorld,
    params_json: *const c_char,
    cost: *mut f64,
) -> SemplanStatus {
    guard(|| {
        let cost = out_arg(cost, "cost")?;
        let w = world.as_mut().ok_or_else(|| null("world"))?;
        let params: SkillParams = serde_json::from_str(str_arg(params_json, "params_json")?)?;
        let (next, c) = apply(&w.state, &params, &w.geometry)?;
        w.state = next;
        *cost = c;
        Ok(())
    })
}

/// # Safety
/// `world` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn semplan_world_free(world: *mut SemplanWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Loads a model checkpoint.
///
/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn semplan_model_load(path: *const c_char, out: *mut *mut SemplanModel) -> SemplanStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = load_checkpoint(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(SemplanModel { model }));
        Ok(())
    })
}

/// Predicts the effect of one skill call: writes a new world handle and the
/// predicted cost.
///
/// # Safety
/// Handles must be live, `params_json` a valid C string, outputs writable.
#[no_mangle]
pub unsafe extern "C" fn semplan_model_predict(
    model: *const SemplanModel,
    world: *const SemplanWorld,
    params_json: *const c_char,
    out_world: *mut *mut SemplanWorld,
    out_cost: *mut f64,
) -> SemplanStatus {
    guard(|| {
        let out_world = out_arg(out_world, "out_world")?;
        let out_cost = out_arg(out_cost, "out_cost")?;
        let m = ref_arg(model, "model")?;
        let w = ref_arg(world, "world")?;
        let params: SkillParams = serde_json::from_str(str_arg(params_json, "params_json")?)?;
        if params.skill() != m.model.skill {
            return Err(Fail(
                SemplanStatus::Contract,
                format!("{} parameters given to the {} model", params.skill(), m.model.skill),
            ));
        }
        let (state, cost) = m.model.predict(&w.state, &params)?;
        *out_world = Box::into_raw(Box::new(SemplanWorld { geometry: w.geometry.clone(), state }));
        *out_cost = cost;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn semplan_model_free(model: *mut SemplanModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// A planner over a comma-separated skill list such as `"pick_place,tray_slide"`.
/// With `models_dir` null it plans with the exact simulator; otherwise it
/// loads `<models_dir>/<skill>.json` for every skill.
///
/// # Safety
/// `skills` must be a valid C string, `models_dir` null or a valid C string
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn semplan_planner_new(
    skills: *const c_char,
    models_dir: *const c_char,
    out: *mut *mut SemplanPlanner,
) -> SemplanStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let skills = parse_skills(str_arg(skills, "skills")?)?;
        let backend: Box<dyn EffectBackend> = if models_dir.is_null() {
            Box::new(GroundTruthBackend::new(Geometry::default()))
        } else {
            let dir = Path::new(str_arg(models_dir, "models_dir")?);
            let mut models = Vec::with_capacity(skills.len());
            for k in &skills {
                models.push(load_checkpoint(&dir.join(format!("{k}.json")))?);
            }
            Box::new(SemBackend::new(models))
        };
        *out = Box::into_raw(Box::new(SemplanPlanner { skills, backend }));
        Ok(())
    })
}

#[derive(Serialize)]
struct PlanReport {
    task: TaskId,
    outcome: String,
    expansions: usize,
    plan: Option<semplan::worldsim::Plan>,
    executed_success: Option<bool>,
    executed_cost: Option<f64>,
}

/// Plans task `task` ("A" to "D") from the world's state with default search
/// settings and writes a JSON report holding the outcome, the plan and its
/// executed result. Finding no plan is not an error.
///
/// # Safety
/// Handles must be live, `task` a valid C string and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn semplan_planner_plan(
    planner: *const SemplanPlanner,
    world: *const SemplanWorld,
    task: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> SemplanStatus {
    guard(|| {
        let out_json = out_arg(out_json, "out_json")?;
        let p = ref_arg(planner, "planner")?;
        let w = ref_arg(world, "world")?;
        let task = parse_task(str_arg(task, "task")?)?;
        let spec = TaskSpec::preset(task);
        let cfg = LifelongConfig::default().planner_config(task, &p.skills);
        let r = wastar(&w.state, &spec, &p.skills, p.backend.as_ref(), &cfg, &w.geometry, seed)?;
        let executed = r.plan.as_ref().map(|plan| execute_plan(&w.state, plan, &spec, &w.geometry));
        let report = PlanReport {
            task,
            outcome: format!("{:?}", r.outcome),
            expansions: r.expansions,
            executed_success: executed.as_ref().map(|e| e.success),
            executed_cost: executed.as_ref().map(|e| e.executed_cost),
            plan: r.plan,
        };
        *out_json = json_string(&report)?;
        Ok(())
    })
}

/// # Safety
/// `planner` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn semplan_planner_free(planner: *mut SemplanPlanner) {
    if !planner.is_null() {
        drop(Box::from_raw(planner));
    }
}
