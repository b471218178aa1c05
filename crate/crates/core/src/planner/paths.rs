use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::SearchResult;
use crate::worldsim::{Plan, SkillId};

/// Path weight favoring skills that were added recently: `n_old + 10 * n_new`.
pub fn path_weight(plan: &Plan, new_skills: &[SkillId]) -> f64 {
    let n_new = plan.steps.iter().filter(|s| new_skills.contains(&s.skill)).count();
    let n_old = plan.len() - n_new;
    (n_old + 10 * n_new) as f64
}

/// Draws `n_l` open nodes, traces their paths, and keeps `n_s` of them with
/// probability proportional to [`path_weight`], without replacement.
///
/// The root has an empty path (weight 0) and is never returned.
pub fn extract_weighted_paths<R: Rng + ?Sized>(
    result: &SearchResult,
    new_skills: &[SkillId],
    n_l: usize,
    n_s: usize,
    rng: &mut R,
) -> Vec<Plan> {
    let open = &result.open;
    if open.is_empty() || n_s == 0 {
        return Vec::new();
    }
    let picked: Vec<usize> = index::sample(rng, open.len(), n_l.min(open.len())).into_iter().map(|i| open[i]).collect();
    let candidates: Vec<(Plan, f64)> = picked
        .into_iter()
        .map(|id| result.plan_to(id))
        .map(|p| {
            let w = path_weight(&p, new_skills);
            (p, w)
        })
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let chosen: Vec<&(Plan, f64)> = candidates
        .choose_multiple_weighted(rng, n_s.min(candidates.len()), |c| c.1)
        .expect("weights are positive and finite")
        .collect();
    chosen.into_iter().map(|(p, _)| p.clone()).collect()
}
