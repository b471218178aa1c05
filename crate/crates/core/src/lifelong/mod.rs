//! Deduplicated transition datasets and the iterative plan, collect, train loop.

mod bootstrap;
mod config;
mod dataset;
mod eval;
mod metrics;
mod run;

pub use bootstrap::{bootstrap_skill, needs_augmentation, AUGMENT_PROB};
pub use config::{derive_seed, LifelongConfig, PresetOverride, SeedTag};
pub use dataset::{dedup_insert, Provenance, SkillDataset, TransitionRecord};
pub use eval::{evaluate, run_trial, summarize, Trial};
pub use metrics::{append_metrics, read_metrics, weighted_cost, EvalRow};
pub use run::{
    add_scheduled, collect_planner_data, collect_random_data, iterative_round, run_lifelong, run_lifelong_with, Learner,
    RoundOutput, RoundReport,
};
