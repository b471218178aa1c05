use std::fmt::Write;

use crate::worldsim::{Geometry, Plan};

/// One line per step: `step k: skill(params) cost=c → region counts`.
pub fn format_trace(plan: &Plan, geom: &Geometry) -> String {
    let mut out = String::new();
    for (k, s) in plan.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "step {}: {}({}) cost={:.3} → {}",
            k + 1,
            s.skill,
            s.params,
            s.predicted_cost,
            s.predicted_state.region_summary(geom)
        );
    }
    let _ = writeln!(out, "total cost={:.3} over {} steps", plan.total_cost, plan.len());
    out
}
