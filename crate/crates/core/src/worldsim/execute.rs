use serde::{Deserialize, Serialize};

use super::geometry::Geometry;
use super::skills::{apply, violation, SkillId, SkillParams};
use super::state::WorldState;
use crate::planner::{goal_satisfied, TaskSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub skill: SkillId,
    pub params: SkillParams,
    /// State the effect model expects after this step.
    pub predicted_state: WorldState,
    pub predicted_cost: f64,
}

/// A skill-parameter sequence with the states and costs predicted while planning.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub total_cost: f64,
}

impl Plan {
    pub fn new(steps: Vec<PlanStep>) -> Self {
        let total_cost = steps.iter().map(|s| s.predicted_cost).sum();
        Plan { steps, total_cost }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn uses_skill(&self, skill: SkillId) -> bool {
        self.steps.iter().any(|s| s.skill == skill)
    }

    pub fn skills(&self) -> Vec<SkillId> {
        self.steps.iter().map(|s| s.skill).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    PreconditionViolated,
    GoalNotReached,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub success: bool,
    pub executed_cost: f64,
    pub final_state: WorldState,
    pub failure_step: Option<usize>,
    pub failure_reason: Option<FailureReason>,
    /// Ground-truth transitions that actually ran, in order.
    pub transitions: Vec<(SkillParams, WorldState, f64)>,
}

/// Runs a plan open loop on the ground-truth simulator.
///
/// Stops at the first step whose precondition fails on the true state.
pub fn execute_plan(start: &WorldState, plan: &Plan, task: &TaskSpec, geom: &Geometry) -> ExecutionResult {
    let mut state = start.clone();
    let mut cost = 0.0;
    let mut transitions = Vec::with_capacity(plan.len());
    for (i, step) in plan.steps.iter().enumerate() {
        if step.params.skill() != step.skill || violation(&state, &step.params, geom).is_some() {
            return ExecutionResult {
                success: false,
                executed_cost: cost,
                final_state: state,
                failure_step: Some(i),
                failure_reason: Some(FailureReason::PreconditionViolated),
                transitions,
            };
        }
        let (next, c) = apply(&state, &step.params, geom).expect("precondition checked above");
        cost += c;
        transitions.push((step.params, next.clone(), c));
        state = next;
    }
    let success = goal_satisfied(&state, task, geom);
    ExecutionResult {
        success,
        executed_cost: cost,
        final_state: state,
        failure_step: None,
        failure_reason: if success { None } else { Some(FailureReason::GoalNotReached) },
        transitions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::TaskId;
    use crate::worldsim::state::BlockFeature;

    #[test]
    fn empty_plan_on_goal_state_succeeds() {
        let g = Geometry::default();
        let s = WorldState::new(vec![BlockFeature { position: [0.85, -0.15, g.bin_rest_z()], color: 0, index: 0 }]).unwrap();
        let r = execute_plan(&s, &Plan::default(), &TaskSpec::preset(TaskId::A), &g);
        assert!(r.success);
        assert_eq!(r.executed_cost, 0.0);
        assert_eq!(r.failure_step, None);
    }

    #[test]
    fn empty_plan_off_goal_reports_goal_not_reached() {
        let g = Geometry::default();
        let s = WorldState::new(vec![BlockFeature { position: [0.45, -0.15, g.table_rest_z()], color: 0, index: 0 }]).unwrap();
        let r = execute_plan(&s, &Plan::default(), &TaskSpec::preset(TaskId::A), &g);
        assert!(!r.success);
        assert_eq!(r.failure_reason, Some(FailureReason::GoalNotReached));
        assert_eq!(r.failure_step, None);
    }

    #[test]
    fn diverging_prediction_fails_at_second_step() {
        // The model believes block 0 stayed on the table after step 1, but the
        // true step 1 put it in the bin, so step 2 cannot pick it.
        let g = Geometry::default();
        let z = g.table_rest_z();
        let start = WorldState::new(vec![
            BlockFeature { position: [0.36, -0.20, z], color: 0, index: 0 },
            BlockFeature { position: [0.54, -0.10, z], color: 1, index: 1 },
        ])
        .unwrap();
        let to_bin = SkillParams::PickPlace { block_index: 0, place: [0.85, -0.15, g.bin_rest_z()] };
        let (true_next, c1) = apply(&start, &to_bin, &g).unwrap();
        let mut believed = start.clone();
        believed.blocks[0].position = [0.40, 0.05, z];
        let again = SkillParams::PickPlace { block_index: 0, place: [0.85, -0.05, g.bin_rest_z()] };
        let plan = Plan::new(vec![
            PlanStep { skill: SkillId::PickPlace, params: to_bin, predicted_state: believed.clone(), predicted_cost: 0.5 },
            PlanStep { skill: SkillId::PickPlace, params: again, predicted_state: believed, predicted_cost: 0.5 },
        ]);
        let r = execute_plan(&start, &plan, &TaskSpec::preset(TaskId::A), &g);
        assert!(!r.success);
        assert_eq!(r.failure_step, Some(1));
        assert_eq!(r.failure_reason, Some(FailureReason::PreconditionViolated));
        assert_eq!(r.final_state, true_next);
        assert!((r.executed_cost - c1).abs() < 1e-15);
        assert_eq!(r.transitions.len(), 1);
    }
}
