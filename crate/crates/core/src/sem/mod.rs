//! Skill-effect models: per-skill graph networks predicting the terminal
//! state change and execution cost of a parameterized skill.

mod checkpoint;
mod encode;
mod gnn;
mod train;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifelong::TransitionRecord;
use crate::neural::{AdamState, Matrix};
use crate::planner::EffectBackend;
use crate::worldsim::{SkillId, SkillParams, WorldState};

pub use checkpoint::{load_checkpoint, save_checkpoint, SCHEMA_VERSION};
pub use encode::{encode_input, input_dim, node_features, target_delta, theta_encoding, NODE_DIM};
pub use gnn::{
    batch_loss, BatchOutput, BatchTarget, GnnCache, GraphBatch, SemNets, EMBED_WIDTHS, GRAPH_WIDTHS, INIT_SCALE, LAMBDA_C,
    LAMBDA_S, MESSAGE_WIDTHS, NODE_WIDTHS,
};
pub use train::{evaluate_loss, train, TrainConfig, TrainReport};

pub const DEFAULT_LR: f64 = 0.003;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SemMeta {
    pub init_seed: u64,
    /// Completed `train` calls.
    pub rounds: u32,
    pub epochs: u64,
    pub dataset_size: usize,
}

/// Effect model of one skill with its optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct SemModel {
    pub skill: SkillId,
    pub nets: SemNets,
    pub adam: AdamState,
    pub meta: SemMeta,
}

/// Predicted per-node feature change and total cost.
#[derive(Clone, Debug, PartialEq)]
pub struct SemPrediction {
    pub delta: Vec<[f64; NODE_DIM]>,
    pub cost: f64,
}

impl SemModel {
    pub fn new(skill: SkillId, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nets = SemNets::init(input_dim(skill), &mut rng);
        let adam = AdamState::new(nets.param_count(), DEFAULT_LR);
        SemModel { skill, nets, adam, meta: SemMeta { init_seed: seed, ..Default::default() } }
    }

    pub fn is_trained(&self) -> bool {
        self.meta.epochs > 0
    }

    /// Stacks one graph per `(state, params)` pair.
    pub fn batch<'a>(&self, items: impl IntoIterator<Item = (&'a WorldState, &'a SkillParams)>) -> Result<GraphBatch> {
        let items: Vec<_> = items.into_iter().collect();
        let sizes: Vec<usize> = items.iter().map(|(s, _)| s.len()).collect();
        let mut x = Matrix::zeros(sizes.iter().sum(), input_dim(self.skill));
        let mut o = 0;
        for (s, p) in items {
            encode::write_rows(&mut x, o, s, p, self.skill)?;
            o += s.len();
        }
        Ok(GraphBatch { x, sizes })
    }

    pub fn forward(&self, state: &WorldState, params: &SkillParams) -> Result<SemPrediction> {
        if state.is_empty() {
            return Err(Error::contract("effect models need at least one block"));
        }
        let out = self.nets.forward(&self.batch([(state, params)])?)?;
        Ok(SemPrediction {
            delta: (0..state.len()).map(|k| out.delta.row(k).try_into().expect("S columns")).collect(),
            cost: out.cost[0],
        })
    }

    /// Successor states and costs for several parameters at one state.
    pub fn predict_many(&self, state: &WorldState, params: &[SkillParams]) -> Result<Vec<(WorldState, f64)>> {
        if params.is_empty() {
            return Ok(Vec::new());
        }
        if state.is_empty() {
            return Err(Error::contract("effect models need at least one block"));
        }
        let out = self.nets.forward(&self.batch(params.iter().map(|p| (state, p)))?)?;
        let n = state.len();
        Ok((0..params.len())
            .map(|g| {
                let mut next = state.clone();
                for (k, b) in next.blocks.iter_mut().enumerate() {
                    let d = out.delta.row(g * n + k);
                    for i in 0..3 {
                        b.position[i] += d[i];
                    }
                }
                (next, out.cost[g])
            })
            .collect())
    }

    pub fn predict(&self, state: &WorldState, params: &SkillParams) -> Result<(WorldState, f64)> {
        Ok(self.predict_many(state, std::slice::from_ref(params))?.remove(0))
    }
}

/// Loss of a single prediction against a recorded transition.
pub fn sem_loss(pred: &SemPrediction, target: &TransitionRecord) -> Result<f64> {
    let k = target.x0.len();
    if pred.delta.len() != k || target.xt.len() != k {
        return Err(Error::contract("prediction and record have different block counts"));
    }
    let want = target_delta(&target.x0, &target.xt);
    let state: f64 = pred.delta.iter().zip(&want).flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b).powi(2))).sum();
    Ok(LAMBDA_C * (target.cost - pred.cost).powi(2) + LAMBDA_S / k as f64 * state)
}

/// Planner backend answering from one trained model per skill.
#[derive(Clone, Debug, Default)]
pub struct SemBackend {
    pub models: BTreeMap<SkillId, SemModel>,
}

impl SemBackend {
    pub fn new(models: impl IntoIterator<Item = SemModel>) -> Self {
        SemBackend { models: models.into_iter().map(|m| (m.skill, m)).collect() }
    }
}

impl EffectBackend for SemBackend {
    fn predict(&self, skill: SkillId, state: &WorldState, params: &[SkillParams]) -> Result<Vec<(WorldState, f64)>> {
        let model = self.models.get(&skill).ok_or_else(|| Error::Expansion(format!("no effect model for {skill}")))?;
        model.predict_many(state, params)
    }
}

impl EffectBackend for SemModel {
    fn predict(&self, skill: SkillId, state: &WorldState, params: &[SkillParams]) -> Result<Vec<(WorldState, f64)>> {
        if skill != self.skill {
            return Err(Error::contract(format!("{} model asked about {skill}", self.skill)));
        }
        self.predict_many(state, params)
    }
}

#[cfg(test)]
mod tests;
