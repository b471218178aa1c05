use std::fs::{self, OpenOptions};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::planner::TaskId;

/// Evaluation of one task at one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub round: u32,
    pub task: TaskId,
    pub n_skills: usize,
    pub success_rate: f64,
    /// Mean executed cost over successful trials; NaN without successes.
    pub mean_cost: f64,
    /// Mean success cost divided by the success rate; infinite without successes.
    pub weighted_cost: f64,
    pub plan_time_ms: f64,
    pub expansions: f64,
    /// Fraction of trials that succeeded with a plan using a newly added skill.
    pub new_skill_plan_rate: f64,
}

pub fn weighted_cost(mean_cost: f64, success_rate: f64) -> f64 {
    if success_rate > 0.0 {
        mean_cost / success_rate
    } else {
        f64::INFINITY
    }
}

/// Appends rows, writing the header only when the file is new or empty.
pub fn append_metrics(path: &Path, rows: &[EvalRow]) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<EvalRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(round: u32, success: f64) -> EvalRow {
        let mean = if success > 0.0 { 4.0 } else { f64::NAN };
        EvalRow {
            round,
            task: TaskId::B,
            n_skills: 2,
            success_rate: success,
            mean_cost: mean,
            weighted_cost: weighted_cost(mean, success),
            plan_time_ms: 0.0,
            expansions: 12.5,
            new_skill_plan_rate: 0.0,
        }
    }

    #[test]
    fn weighting() {
        assert_eq!(weighted_cost(4.0, 0.8), 5.0);
        assert_eq!(weighted_cost(4.0, 1.0), 4.0);
        assert!(weighted_cost(f64::NAN, 0.0).is_infinite());
    }

    #[test]
    fn append_keeps_one_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        append_metrics(&path, &[row(0, 0.8)]).unwrap();
        append_metrics(&path, &[row(1, 0.0), row(2, 1.0)]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("round,")).count(), 1);
        assert_eq!(
            text.lines().next().unwrap(),
            "round,task,n_skills,success_rate,mean_cost,weighted_cost,plan_time_ms,expansions,new_skill_plan_rate"
        );
        let back = read_metrics(&path).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0], row(0, 0.8));
        assert!(back[1].mean_cost.is_nan() && back[1].weighted_cost.is_infinite());
    }
}
