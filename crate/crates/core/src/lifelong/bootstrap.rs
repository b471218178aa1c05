use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{Provenance, SkillDataset, TransitionRecord};
use crate::error::{Error, Result};
use crate::worldsim::{apply, sample_initial_state_with, sample_params, scatter_into_fixtures, Geometry, SkillId};

/// Probability that a block is moved into a fixture before sampling parameters
/// for skills that act on tray or bin contents.
pub const AUGMENT_PROB: f64 = 0.5;

pub fn needs_augmentation(skill: SkillId) -> bool {
    matches!(skill, SkillId::TraySlide | SkillId::BinTilt)
}

/// Simulated transitions from `m0` random initial states with `p0` parameters each.
pub fn bootstrap_skill(
    skill: SkillId,
    geom: &Geometry,
    counts: &[usize],
    m0: usize,
    p0: usize,
    augment: bool,
    seed: u64,
) -> Result<SkillDataset> {
    if m0 == 0 || p0 == 0 {
        return Err(Error::config("bootstrap needs at least one state and one parameter per state"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = SkillDataset::new(skill);
    for _ in 0..m0 {
        let mut s = sample_initial_state_with(geom, counts, &mut rng)?;
        if augment {
            s = scatter_into_fixtures(&s, geom, AUGMENT_PROB, &mut rng);
        }
        for p in sample_params(skill, &s, geom, &mut rng, p0) {
            let (next, cost) = apply(&s, &p, geom)?;
            ds.insert(TransitionRecord::new(s.clone(), p, next, cost, Provenance::Bootstrap)?)?;
        }
    }
    if ds.is_empty() {
        warn!("bootstrap for {skill} produced no transitions; its precondition never held on the sampled states");
    }
    Ok(ds)
}
