//! Empirical checks of how far plans through a sampled parameter graph can
//! drift from arbitrary reference plans, given the graph's dispersion and
//! Lipschitz constants of the skill effects.

mod bounds;
mod dispersion;
mod lipschitz;

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::worldsim::{Geometry, SkillId};

pub use bounds::{
    check_cost_bound, check_state_bound, cost_bound, nearest_graph_path, state_bound, BoundCheckConfig, BoundCheckReport,
    BoundKind, BoundTrial, PathPair, BOUND_SLACK,
};
pub use dispersion::{estimate_dispersion, DispersionEstimate, MAX_CORNER_DIM};
pub use lipschitz::{estimate_lipschitz, free_params, with_free, LipschitzDomain, LipschitzEstimate, DEFAULT_INFLATION};

/// `K (K^N - 1) / (K - 1)`, i.e. `K + K^2 + ... + K^N`, which is `N` at `K = 1`.
pub fn kappa(k: f64, n: usize) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::domain(format!("kappa needs K > 0, got {k}")));
    }
    if n == 0 {
        return Err(Error::domain("kappa needs N >= 1"));
    }
    // The power sum avoids the cancellation of the closed form near K = 1.
    let (mut term, mut sum) = (1.0, 0.0);
    for _ in 0..n {
        term *= k;
        sum += term;
    }
    Ok(sum)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryConfig {
    pub skill: SkillId,
    /// Plan lengths to check.
    pub lengths: Vec<usize>,
    /// Pairs for the Lipschitz estimate.
    pub pairs: usize,
    pub inflation: f64,
    pub bounds: BoundCheckConfig,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            skill: SkillId::PickPlace,
            lengths: vec![1, 2, 3],
            pairs: 2000,
            inflation: DEFAULT_INFLATION,
            bounds: BoundCheckConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub lipschitz: LipschitzEstimate,
    pub state: Vec<BoundCheckReport>,
    pub cost: Vec<BoundCheckReport>,
}

impl TheoryReport {
    pub fn max_violation_rate(&self) -> f64 {
        self.state.iter().chain(&self.cost).map(|r| r.violation_rate()).fold(0.0, f64::max)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Estimates the constants of one skill, then checks both bounds on plans
/// of each requested length made only of that skill.
pub fn run_theory(cfg: &TheoryConfig, geom: &Geometry) -> Result<TheoryReport> {
    if cfg.lengths.is_empty() || cfg.lengths.contains(&0) {
        return Err(Error::domain("plan lengths must be at least 1"));
    }
    if !(cfg.inflation >= 1.0) {
        return Err(Error::domain("inflation must be at least 1"));
    }
    let domain = LipschitzDomain { inflation: cfg.inflation, ..LipschitzDomain::new(cfg.skill, &cfg.bounds.counts) };
    let lipschitz = estimate_lipschitz(&domain, geom, cfg.pairs, &mut ChaCha8Rng::seed_from_u64(cfg.bounds.seed))?;
    let mut state = Vec::new();
    let mut cost = Vec::new();
    for &n in &cfg.lengths {
        let seq = vec![cfg.skill; n];
        state.push(check_state_bound(&seq, geom, &cfg.bounds, &lipschitz)?);
        cost.push(check_cost_bound(&seq, geom, &cfg.bounds, &lipschitz)?);
    }
    Ok(TheoryReport { lipschitz, state, cost })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_values() {
        assert_eq!(kappa(2.0, 3).unwrap(), 14.0);
        assert_eq!(kappa(1.0, 5).unwrap(), 5.0);
        assert_eq!(kappa(3.0, 2).unwrap(), 12.0);
        assert!((kappa(1.0 + 1e-9, 4).unwrap() - 4.0).abs() < 1e-6);
        assert!((kappa(1.0 - 1e-9, 4).unwrap() - 4.0).abs() < 1e-6);
        let closed = |k: f64, n: i32| k * (k.powi(n) - 1.0) / (k - 1.0);
        assert!((kappa(1.7, 6).unwrap() - closed(1.7, 6)).abs() < 1e-9);
        assert!((kappa(0.4, 3).unwrap() - closed(0.4, 3)).abs() < 1e-12);
    }

    #[test]
    fn kappa_domain() {
        assert!(matches!(kappa(0.0, 2), Err(Error::Domain(_))));
        assert!(kappa(-1.0, 2).is_err());
        assert!(kappa(2.0, 0).is_err());
    }

    #[test]
    fn small_run_has_no_violations() {
        let cfg = TheoryConfig {
            lengths: vec![1, 2],
            pairs: 300,
            bounds: BoundCheckConfig { trials: 15, ..Default::default() },
            ..Default::default()
        };
        let r = run_theory(&cfg, &Geometry::default()).unwrap();
        assert_eq!(r.state.len(), 2);
        assert_eq!(r.max_violation_rate(), 0.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("theory.json");
        r.save_json(&path).unwrap();
        let back: TheoryReport = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
