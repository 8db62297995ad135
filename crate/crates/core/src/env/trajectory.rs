use std::io::Write;

use super::StepResult;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: usize,
    pub value: f64,
    pub reward: f64,
    pub action: Vec<f64>,
    pub risk_triggered: bool,
}

impl TrajectoryRow {
    pub fn from_step(action: &[f64], step: &StepResult) -> Self {
        TrajectoryRow {
            t: step.obs.state.t(),
            value: step.info.value_after,
            reward: step.reward,
            action: action.to_vec(),
            risk_triggered: step.info.risk_triggered,
        }
    }
}

/// CSV `t,v,reward,action_json,risk_triggered`.
pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| std::io::Error::other(e.to_string());
    w.write_record(["t", "v", "reward", "action_json", "risk_triggered"]).map_err(io)?;
    for r in rows {
        let action = serde_json::to_string(&r.action).map_err(std::io::Error::other)?;
        w.write_record([
            r.t.to_string(),
            r.value.to_string(),
            r.reward.to_string(),
            action,
            r.risk_triggered.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
}
