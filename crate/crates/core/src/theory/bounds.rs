use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dispersion::estimate_dispersion;
use super::kappa;
use super::lipschitz::{effect, free_params, param_distance, same_mode, with_free, LipschitzEstimate};
use crate::error::{Error, Result};
use crate::lifelong::{needs_augmentation, AUGMENT_PROB};
use crate::worldsim::{sample_initial_state_with, sample_params, scatter_into_fixtures, Geometry, SkillId, SkillParams, WorldState};

/// Slack for floating point noise when comparing against a bound.
pub const BOUND_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundCheckConfig {
    /// Target dispersion of each step's parameter set.
    pub delta: f64,
    pub trials: usize,
    /// Parameters per step in the sampled graph.
    pub branching: usize,
    /// Random probes per dispersion estimate.
    pub probes: usize,
    pub counts: Vec<usize>,
    /// Set by the enclosing run configuration.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for BoundCheckConfig {
    fn default() -> Self {
        BoundCheckConfig { delta: 0.02, trials: 100, branching: 6, probes: 64, counts: vec![3, 3], seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    State,
    Cost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTrial {
    pub trial: usize,
    pub delta_hat: f64,
    /// Final state distance, or the graph path's excess cost.
    pub deviation: f64,
    pub bound: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub kind: BoundKind,
    pub skills: Vec<SkillId>,
    pub k_used: f64,
    pub l_used: f64,
    pub trials: usize,
    /// Trials without a reference plan or without a same-sequence graph path.
    pub skipped: usize,
    pub violations: usize,
    pub per_trial: Vec<BoundTrial>,
}

impl BoundCheckReport {
    /// Violations over evaluated (non-skipped) trials.
    pub fn violation_rate(&self) -> f64 {
        if self.per_trial.is_empty() {
            0.0
        } else {
            self.violations as f64 / self.per_trial.len() as f64
        }
    }
}

/// Reference path and its closest same-sequence path through the sampled graph.
#[derive(Clone, Debug, PartialEq)]
pub struct PathPair {
    pub delta_hat: f64,
    pub state_deviation: f64,
    pub reference_cost: f64,
    pub graph_cost: f64,
}

fn trial_rng(cfg: &BoundCheckConfig, n: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(((n as u64) << 32) | trial as u64);
    rng
}

/// Parameters around `theta` in a box small enough that their dispersion
/// cannot exceed `delta`, all valid at `x` and in the same mode as `theta`.
fn step_params<R: Rng + ?Sized>(
    x: &WorldState,
    theta: &SkillParams,
    cfg: &BoundCheckConfig,
    geom: &Geometry,
    rng: &mut R,
) -> Result<Option<(Vec<SkillParams>, f64)>> {
    let centre = free_params(theta);
    let half = cfg.delta / (2.0 * (centre.len() as f64).sqrt());
    let (want, _) = effect(x, theta, geom).ok_or_else(|| Error::contract("reference parameter is invalid"))?;
    let mut set = Vec::with_capacity(cfg.branching);
    for _ in 0..cfg.branching * 50 {
        if set.len() == cfg.branching {
            break;
        }
        let v: Vec<f64> = centre.iter().map(|c| if half > 0.0 { c + rng.gen_range(-half..=half) } else { *c }).collect();
        let p = with_free(theta, &v);
        if effect(x, &p, geom).is_some_and(|(y, _)| same_mode(&y, &want, geom)) {
            set.push(p);
        }
    }
    if set.is_empty() {
        return Ok(None);
    }
    let lower: Vec<f64> = centre.iter().map(|c| c - half).collect();
    let upper: Vec<f64> = centre.iter().map(|c| c + half).collect();
    let pts: Vec<Vec<f64>> = set.iter().map(free_params).collect();
    let disp = estimate_dispersion(&pts, &lower, &upper, cfg.probes, rng)?.value;
    let nearest = set.iter().map(|p| param_distance(p, theta)).fold(f64::INFINITY, f64::min);
    Ok(Some((set, disp.max(nearest))))
}

fn search(
    x: &WorldState,
    cost: f64,
    steps: &[Vec<SkillParams>],
    goal: &WorldState,
    geom: &Geometry,
    best: &mut Option<(f64, f64)>,
) {
    let Some((first, rest)) = steps.split_first() else {
        let dev = x.distance(goal);
        if best.map_or(true, |(d, _)| dev < d) {
            *best = Some((dev, cost));
        }
        return;
    };
    for p in first {
        if let Some((y, c)) = effect(x, p, geom) {
            search(&y, cost + c, rest, goal, geom, best);
        }
    }
}

/// Builds one trial: a random reference plan with the given skill sequence,
/// a sampled graph with `branching` nearby parameters per step, and the
/// graph path ending closest to the reference. `None` marks a skipped trial.
pub fn nearest_graph_path(
    skills: &[SkillId],
    geom: &Geometry,
    cfg: &BoundCheckConfig,
    trial: usize,
) -> Result<Option<PathPair>> {
    if skills.is_empty() {
        return Err(Error::domain("the skill sequence must not be empty"));
    }
    if cfg.branching == 0 || !(cfg.delta >= 0.0) {
        return Err(Error::domain("branching must be positive and delta non-negative"));
    }
    let mut rng = trial_rng(cfg, skills.len(), trial);
    let mut x = sample_initial_state_with(geom, &cfg.counts, &mut rng)?;
    if skills.iter().any(|k| needs_augmentation(*k)) {
        x = scatter_into_fixtures(&x, geom, AUGMENT_PROB, &mut rng);
    }
    let start = x.clone();
    let mut reference_cost = 0.0;
    let mut steps = Vec::with_capacity(skills.len());
    let mut delta_hat: f64 = 0.0;
    for &k in skills {
        let Some(theta) = sample_params(k, &x, geom, &mut rng, 1).pop() else {
            return Ok(None);
        };
        let Some((set, d)) = step_params(&x, &theta, cfg, geom, &mut rng)? else {
            return Ok(None);
        };
        delta_hat = delta_hat.max(d);
        steps.push(set);
        let (y, c) = effect(&x, &theta, geom).expect("checked by step_params");
        reference_cost += c;
        x = y;
    }
    let mut best = None;
    search(&start, 0.0, &steps, &x, geom, &mut best);
    Ok(best.map(|(state_deviation, graph_cost)| PathPair { delta_hat, state_deviation, reference_cost, graph_cost }))
}

/// `2 κ_N δ̂`.
pub fn state_bound(k: f64, n: usize, delta_hat: f64) -> Result<f64> {
    Ok(2.0 * kappa(k, n)? * delta_hat)
}

/// `δ̂ N L (1 + 2 Σ_{i=1..N} κ_i)`.
pub fn cost_bound(k: f64, l: f64, n: usize, delta_hat: f64) -> Result<f64> {
    let mut sum = 0.0;
    for i in 1..=n {
        sum += kappa(k, i)?;
    }
    Ok(delta_hat * n as f64 * l * (1.0 + 2.0 * sum))
}

fn check(
    kind: BoundKind,
    skills: &[SkillId],
    geom: &Geometry,
    cfg: &BoundCheckConfig,
    lip: &LipschitzEstimate,
) -> Result<BoundCheckReport> {
    let (k, l, n) = (lip.k_inflated(), lip.l_inflated(), skills.len());
    let mut report = BoundCheckReport {
        kind,
        skills: skills.to_vec(),
        k_used: k,
        l_used: l,
        trials: cfg.trials,
        skipped: 0,
        violations: 0,
        per_trial: Vec::new(),
    };
    for trial in 0..cfg.trials {
        let Some(pair) = nearest_graph_path(skills, geom, cfg, trial)? else {
            report.skipped += 1;
            continue;
        };
        let (deviation, bound) = match kind {
            BoundKind::State => (pair.state_deviation, state_bound(k, n, pair.delta_hat)?),
            BoundKind::Cost => (pair.graph_cost - pair.reference_cost, cost_bound(k, l, n, pair.delta_hat)?),
        };
        let violated = deviation > bound + BOUND_SLACK;
        report.violations += violated as usize;
        report.per_trial.push(BoundTrial { trial, delta_hat: pair.delta_hat, deviation, bound, violated });
    }
    Ok(report)
}

/// Final-state deviation of the closest graph path against `2 κ_N δ̂`.
pub fn check_state_bound(
    skills: &[SkillId],
    geom: &Geometry,
    cfg: &BoundCheckConfig,
    lip: &LipschitzEstimate,
) -> Result<BoundCheckReport> {
    check(BoundKind::State, skills, geom, cfg, lip)
}

/// Excess cost of the closest graph path against `δ̂ N L (1 + 2 Σ κ_i)`.
pub fn check_cost_bound(
    skills: &[SkillId],
    geom: &Geometry,
    cfg: &BoundCheckConfig,
    lip: &LipschitzEstimate,
) -> Result<BoundCheckReport> {
    check(BoundKind::Cost, skills, geom, cfg, lip)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> LipschitzEstimate {
        LipschitzEstimate { k_hat: 1.0, l_hat: 2.0, pairs: 1, inflation: 1.0 }
    }

    #[test]
    fn single_step_bounds() {
        assert!((state_bound(1.0, 1, 0.05).unwrap() - 0.1).abs() < 1e-15);
        // δ L (1 + 2K) with δ = 0.1, L = 2, K = 1.5
        assert!((cost_bound(1.5, 2.0, 1, 0.1).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_dispersion_reproduces_reference() {
        let g = Geometry::default();
        let cfg = BoundCheckConfig { delta: 0.0, trials: 10, ..Default::default() };
        let seq = [SkillId::PickPlace; 3];
        for t in 0..cfg.trials {
            if let Some(p) = nearest_graph_path(&seq, &g, &cfg, t).unwrap() {
                assert_eq!(p.delta_hat, 0.0);
                assert_eq!(p.state_deviation, 0.0);
                assert_eq!(p.graph_cost, p.reference_cost);
            }
        }
        let s = check_state_bound(&seq, &g, &cfg, &unit()).unwrap();
        let c = check_cost_bound(&seq, &g, &cfg, &unit()).unwrap();
        assert_eq!((s.violations, c.violations), (0, 0));
        assert!(s.per_trial.len() + s.skipped == 10);
    }

    #[test]
    fn measured_dispersion_respects_target() {
        let g = Geometry::default();
        let cfg = BoundCheckConfig { delta: 0.03, trials: 20, ..Default::default() };
        let r = check_state_bound(&[SkillId::PickPlace, SkillId::PickPlace], &g, &cfg, &unit()).unwrap();
        assert!(!r.per_trial.is_empty());
        for t in &r.per_trial {
            assert!(t.delta_hat > 0.0 && t.delta_hat <= cfg.delta + 1e-12, "{t:?}");
        }
        assert!(r.violations <= r.trials);
    }

    #[test]
    fn reports_are_deterministic() {
        let g = Geometry::default();
        let cfg = BoundCheckConfig { trials: 8, ..Default::default() };
        let a = check_cost_bound(&[SkillId::PickPlace], &g, &cfg, &unit()).unwrap();
        assert_eq!(a, check_cost_bound(&[SkillId::PickPlace], &g, &cfg, &unit()).unwrap());
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let r = check_state_bound(&[], &Geometry::default(), &BoundCheckConfig::default(), &unit());
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
