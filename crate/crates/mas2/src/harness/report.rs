use std::collections::BTreeMap;
use std::fmt::Write as _;

use mas2_core::Money;
use serde::{Deserialize, Serialize};

use crate::executor::EventKind;
use crate::formats::TrajectoryRecord;

pub const UNLABELLED: &str = "(none)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task_id: String,
    pub trajectory_id: String,
    pub domain: String,
    pub success: bool,
    /// C(τ); zero for tasks that never reached execution.
    pub cost: Money,
    pub rectifications: u32,
    pub outcome: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub trajectories: u64,
    pub successes: u64,
    pub cost: Money,
}

impl Tally {
    fn add(&mut self, success: bool, cost: Money) {
        self.trajectories += 1;
        self.successes += success as u64;
        self.cost += cost;
    }

    /// Percentage, or 0 for an empty tally.
    pub fn success_rate(&self) -> f64 {
        if self.trajectories == 0 {
            0.0
        } else {
            100.0 * self.successes as f64 / self.trajectories as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BackboneUsage {
    pub calls: u64,
    pub cost: Money,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<TaskRow>,
    pub total: Tally,
    pub per_domain: BTreeMap<String, Tally>,
    pub meta_cost: Money,
    pub rectified_trajectories: u64,
    pub rectifications: u64,
    pub rectification_attempts: u64,
    /// Exchange counts and spend per backbone, rectifier calls included.
    pub backbones: BTreeMap<String, BackboneUsage>,
}

impl RunReport {
    pub fn from_records(records: &[TrajectoryRecord]) -> RunReport {
        let mut r = RunReport::default();
        let mut meta_by_task: BTreeMap<&str, Money> = BTreeMap::new();
        for rec in records {
            let domain = rec.domain.clone().unwrap_or_else(|| UNLABELLED.into());
            meta_by_task.insert(&rec.task_id, rec.meta_cost);
            let (success, cost, rects, outcome) = match (&rec.outcome, &rec.error) {
                (Some(o), _) => {
                    r.rectification_attempts += o.rectification_attempts as u64;
                    r.rectifications += o.rectification_count as u64;
                    r.rectified_trajectories += (o.rectification_count > 0) as u64;
                    for e in &o.event_log {
                        if let EventKind::CostDelta { backbone, cost, .. } = &e.kind {
                            let u = r.backbones.entry(backbone.clone()).or_default();
                            u.calls += 1;
                            u.cost += *cost;
                        }
                    }
                    (o.success, o.total_cost, o.rectification_count, format!("{:?}", o.terminal))
                }
                (None, err) => (false, Money::ZERO, 0, format!("error: {}", err.as_deref().unwrap_or("unknown"))),
            };
            r.total.add(success, cost);
            r.per_domain.entry(domain.clone()).or_default().add(success, cost);
            r.rows.push(TaskRow { task_id: rec.task_id.clone(), trajectory_id: rec.trajectory_id.clone(), domain, success, cost, rectifications: rects, outcome });
        }
        r.meta_cost = meta_by_task.values().copied().sum();
        r
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let t = &self.total;
        let _ = writeln!(s, "trajectories  {}", t.trajectories);
        let _ = writeln!(s, "successes     {}", t.successes);
        let _ = writeln!(s, "success rate  {:.2}%", t.success_rate());
        let _ = writeln!(s, "cost          {}", t.cost);
        let _ = writeln!(s, "meta cost     {}", self.meta_cost);
        let _ = writeln!(s, "rectified     {} trajectories, {} accepted of {} attempts", self.rectified_trajectories, self.rectifications, self.rectification_attempts);
        if !self.per_domain.is_empty() {
            let _ = writeln!(s, "\n{:<12} {:>6} {:>6} {:>8} {:>20}", "domain", "n", "ok", "rate", "cost");
            for (d, row) in &self.per_domain {
                let _ = writeln!(s, "{:<12} {:>6} {:>6} {:>7.2}% {:>20}", d, row.trajectories, row.successes, row.success_rate(), row.cost);
            }
        }
        if !self.backbones.is_empty() {
            let _ = writeln!(s, "\n{:<30} {:>6} {:>20}", "backbone", "calls", "cost");
            for (b, u) in &self.backbones {
                let _ = writeln!(s, "{:<30} {:>6} {:>20}", b, u.calls, u.cost);
            }
        }
        if !self.rows.is_empty() {
            let _ = writeln!(s, "\n{:<16} {:<20} {:<10} {:<5} {:>20} {:>5}  outcome", "task", "trajectory", "domain", "ok", "cost", "rect");
            for row in &self.rows {
                let _ = writeln!(
                    s,
                    "{:<16} {:<20} {:<10} {:<5} {:>20} {:>5}  {}",
                    row.task_id, row.trajectory_id, row.domain, row.success, row.cost, row.rectifications, row.outcome
                );
            }
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("task_id,trajectory_id,domain,success,cost,rectifications,outcome\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{},{},{}", csv(&r.task_id), csv(&r.trajectory_id), csv(&r.domain), r.success, r.cost, r.rectifications, csv(&r.outcome));
        }
        s
    }
}

fn csv(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
