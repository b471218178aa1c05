use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifelong::{needs_augmentation, AUGMENT_PROB};
use crate::worldsim::{apply, sample_initial_state_with, sample_params, scatter_into_fixtures, Geometry, SkillId, SkillParams, WorldState};

pub const DEFAULT_INFLATION: f64 = 1.2;

/// Empirical Lipschitz constants of a skill's effect and cost maps.
///
/// Both are maxima over finitely many pairs and therefore lower bounds of
/// the true constants; the inflation factor is applied by the bound checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub k_hat: f64,
    pub l_hat: f64,
    pub pairs: usize,
    pub inflation: f64,
}

impl LipschitzEstimate {
    pub fn k_inflated(&self) -> f64 {
        self.k_hat * self.inflation
    }

    pub fn l_inflated(&self) -> f64 {
        self.l_hat * self.inflation
    }

    /// Constants valid for sequences mixing the skills of both estimates.
    pub fn max(&self, other: &LipschitzEstimate) -> LipschitzEstimate {
        LipschitzEstimate {
            k_hat: self.k_hat.max(other.k_hat),
            l_hat: self.l_hat.max(other.l_hat),
            pairs: self.pairs + other.pairs,
            inflation: self.inflation.max(other.inflation),
        }
    }
}

/// Where pairs are drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzDomain {
    pub skill: SkillId,
    pub counts: Vec<usize>,
    /// Half-width of the uniform nudge applied to block x and y; 0 fixes the state.
    pub state_scale: f64,
    /// Half-width of the uniform nudge applied to each free parameter.
    pub param_scale: f64,
    /// Keeps tilt angles below (`true`) or at/above the friction threshold.
    pub tilt_below: Option<bool>,
    pub inflation: f64,
}

impl LipschitzDomain {
    pub fn new(skill: SkillId, counts: &[usize]) -> Self {
        LipschitzDomain {
            skill,
            counts: counts.to_vec(),
            state_scale: 0.01,
            param_scale: if skill == SkillId::BinTilt { 1.0 } else { 0.01 },
            tilt_below: None,
            inflation: DEFAULT_INFLATION,
        }
    }
}

/// Continuous parameter coordinates that vary within one kind of action.
/// A placement's height is fixed by its region, so only x and y count.
pub fn free_params(p: &SkillParams) -> Vec<f64> {
    match *p {
        SkillParams::PickPlace { place, .. } => vec![place[0], place[1]],
        _ => p.continuous(),
    }
}

pub fn with_free(p: &SkillParams, v: &[f64]) -> SkillParams {
    match *p {
        SkillParams::PickPlace { block_index, place } => SkillParams::PickPlace { block_index, place: [v[0], v[1], place[2]] },
        SkillParams::TraySlide { .. } => SkillParams::TraySlide { bin_x: v[0] },
        SkillParams::TraySweep { .. } => SkillParams::TraySweep { start_x: v[0] },
        SkillParams::BinTilt { .. } => SkillParams::BinTilt { angle_deg: v[0] },
    }
}

pub(crate) fn param_distance(a: &SkillParams, b: &SkillParams) -> f64 {
    free_params(a).iter().zip(free_params(b)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Ground-truth effect, or `None` when the precondition fails.
pub(crate) fn effect(x: &WorldState, p: &SkillParams, geom: &Geometry) -> Option<(WorldState, f64)> {
    apply(x, p, geom).ok()
}

/// Effects that end with every block in the same region belong to one
/// continuous piece of the skill's effect map.
pub(crate) fn same_mode(a: &WorldState, b: &WorldState, geom: &Geometry) -> bool {
    a.regions(geom) == b.regions(geom)
}

fn on_tilt_side(p: &SkillParams, below: Option<bool>, geom: &Geometry) -> bool {
    match (p, below) {
        (SkillParams::BinTilt { angle_deg }, Some(b)) => (*angle_deg < geom.skills.friction_threshold_deg) == b,
        _ => true,
    }
}

fn nudge<R: Rng + ?Sized>(v: f64, scale: f64, rng: &mut R) -> f64 {
    if scale > 0.0 {
        v + rng.gen_range(-scale..=scale)
    } else {
        v
    }
}

/// Largest observed ratios of effect and cost change to input change over
/// random nearby pairs that satisfy the precondition and stay in one mode.
pub fn estimate_lipschitz<R: Rng + ?Sized>(
    domain: &LipschitzDomain,
    geom: &Geometry,
    pairs: usize,
    rng: &mut R,
) -> Result<LipschitzEstimate> {
    if pairs == 0 {
        return Err(Error::domain("at least one pair is required"));
    }
    if !(domain.state_scale >= 0.0 && domain.param_scale >= 0.0) || domain.state_scale + domain.param_scale == 0.0 {
        return Err(Error::domain("at least one perturbation scale must be positive"));
    }
    let mut moves = Vec::new();
    if domain.state_scale > 0.0 {
        moves.push((true, false));
    }
    if domain.param_scale > 0.0 {
        moves.push((false, true));
    }
    if moves.len() == 2 {
        moves.push((true, true));
    }
    let (mut k_hat, mut l_hat, mut found) = (0.0f64, 0.0f64, 0);
    for _ in 0..pairs * 100 {
        if found == pairs {
            break;
        }
        let mut x = sample_initial_state_with(geom, &domain.counts, rng)?;
        if needs_augmentation(domain.skill) {
            x = scatter_into_fixtures(&x, geom, AUGMENT_PROB, rng);
        }
        let Some(theta) = sample_params(domain.skill, &x, geom, rng, 1).pop() else {
            continue;
        };
        if !on_tilt_side(&theta, domain.tilt_below, geom) {
            continue;
        }
        let &(move_x, move_p) = moves.choose(rng).expect("non-empty");
        let mut x2 = x.clone();
        if move_x {
            for b in x2.blocks.iter_mut() {
                b.position[0] = nudge(b.position[0], domain.state_scale, rng);
                b.position[1] = nudge(b.position[1], domain.state_scale, rng);
            }
            if !same_mode(&x, &x2, geom) {
                continue;
            }
        }
        let theta2 = if move_p {
            let v: Vec<f64> = free_params(&theta).iter().map(|v| nudge(*v, domain.param_scale, rng)).collect();
            with_free(&theta, &v)
        } else {
            theta
        };
        if !on_tilt_side(&theta2, domain.tilt_below, geom) {
            continue;
        }
        let (Some((y, c)), Some((y2, c2))) = (effect(&x, &theta, geom), effect(&x2, &theta2, geom)) else {
            continue;
        };
        if !same_mode(&y, &y2, geom) {
            continue;
        }
        let d_in = (x.distance(&x2).powi(2) + param_distance(&theta, &theta2).powi(2)).sqrt();
        if d_in == 0.0 {
            continue;
        }
        k_hat = k_hat.max(y.distance(&y2) / d_in);
        l_hat = l_hat.max((c - c2).abs() / d_in);
        found += 1;
    }
    if found == 0 {
        return Err(Error::domain(format!("no valid pairs found for {}", domain.skill)));
    }
    Ok(LipschitzEstimate { k_hat, l_hat, pairs: found, inflation: domain.inflation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run(domain: &LipschitzDomain, seed: u64) -> LipschitzEstimate {
        estimate_lipschitz(domain, &Geometry::default(), 400, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn pick_place_placement_is_identity() {
        let e = run(&LipschitzDomain::new(SkillId::PickPlace, &[3, 3]), 1);
        assert!(e.k_hat >= 0.99, "{e:?}");
        assert!(e.k_hat <= 1.0 + 1e-9, "{e:?}");
        assert!(e.l_hat > 0.5 && e.l_hat < 3.0, "{e:?}");
        assert_eq!(e.pairs, 400);
    }

    #[test]
    fn shallow_tilt_ignores_angle() {
        let d = LipschitzDomain { state_scale: 0.0, tilt_below: Some(true), ..LipschitzDomain::new(SkillId::BinTilt, &[3, 3]) };
        let e = run(&d, 2);
        assert_eq!(e.k_hat, 0.0);
        let per_deg = Geometry::default().skills.tilt_cost_per_deg;
        assert!((e.l_hat - per_deg).abs() < 1e-9, "{e:?}");
    }

    #[test]
    fn deterministic_per_seed() {
        let d = LipschitzDomain::new(SkillId::TraySlide, &[3, 3]);
        assert_eq!(run(&d, 9), run(&d, 9));
    }

    #[test]
    fn impossible_domain() {
        let d = LipschitzDomain::new(SkillId::PickPlace, &[0, 0]);
        let r = estimate_lipschitz(&d, &Geometry::default(), 5, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn free_parameter_round_trip() {
        let p = SkillParams::PickPlace { block_index: 2, place: [0.4, 0.1, 0.7] };
        assert_eq!(with_free(&p, &free_params(&p)), p);
        let q = with_free(&p, &[0.43, 0.14]);
        assert!((param_distance(&p, &q) - 0.05).abs() < 1e-12);
    }
}
