#[path = "support/fixtures.rs"]
mod fixtures;

use mas2::executor::{execute, ExecEnv, ExecutorConfig, Judge};
use mas2::formats::{read_trajectories, write_jsonl, TrajectoryRecord, TRAJ_SCHEMA_VERSION};
use mas2::gateway::{MockRule, MockScript};
use mas2::harness::{RunReport, UNLABELLED};
use mas2::meta::MetaAgentConfig;
use mas2::operators::{prompts, Sandbox};
use mas2_core::Money;
use proptest::prelude::*;

use fixtures::*;

const BACKBONES: [&str; 3] = ["gpt-4o", "gpt-4o-mini", "qwen/qwq-32b"];

fn record(i: usize, backbone: &str, reply: &str, domain: Option<&str>, failed_task: bool) -> TrajectoryRecord {
    let outcome = (!failed_task).then(|| {
        let gw = mock_gateway(MockScript::default().rule(MockRule::text(prompts::ANSWER, &[reply])));
        let sandbox = Sandbox::default();
        let env = ExecEnv { gateway: &gw, docstore: None, sandbox: &sandbox, checks: None };
        let meta = MetaAgentConfig { theta_c: Money::from_picos(u64::MAX / 2), ..Default::default() };
        execute(concrete(ANSWER_ONLY, backbone), "q", &Judge::ExactMatch { reference: "yes".into() }, &meta, &ExecutorConfig::default(), &env, "r", i as u64)
    });
    TrajectoryRecord {
        schema_version: TRAJ_SCHEMA_VERSION,
        task_id: format!("task{}", i / 2),
        domain: domain.map(str::to_string),
        trajectory_id: format!("task{}/{i}", i / 2),
        meta_cost: Money::from_picos(1000 + (i / 2) as u64),
        error: failed_task.then(|| "generator produced nothing usable".to_string()),
        outcome,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn totals_are_conserved(specs in proptest::collection::vec((0usize..3, any::<bool>(), 0usize..3, 0u8..8), 0..8)) {
        let records: Vec<TrajectoryRecord> = specs
            .iter()
            .enumerate()
            .map(|(i, &(b, ok, d, fail))| {
                let domain = [None, Some("math"), Some("qa")][d];
                record(i, BACKBONES[b], if ok { "yes" } else { "no" }, domain, fail == 0)
            })
            .collect();
        let r = RunReport::from_records(&records);
        let outcomes: Vec<_> = records.iter().filter_map(|x| x.outcome.as_ref()).collect();

        prop_assert_eq!(r.rows.len(), records.len());
        prop_assert_eq!(r.total.trajectories, records.len() as u64);
        prop_assert_eq!(r.total.successes, outcomes.iter().filter(|o| o.success).count() as u64);
        let spent: Money = outcomes.iter().map(|o| o.total_cost).sum();
        prop_assert_eq!(r.total.cost, spent);
        prop_assert_eq!(r.backbones.values().map(|u| u.cost).sum::<Money>(), spent);
        prop_assert_eq!(r.per_domain.values().map(|t| t.cost).sum::<Money>(), spent);
        prop_assert_eq!(r.per_domain.values().map(|t| t.trajectories).sum::<u64>(), r.total.trajectories);
        // Meta spend is per task, not per trajectory.
        let tasks: std::collections::BTreeSet<_> = records.iter().map(|x| x.task_id.clone()).collect();
        let meta: Money = tasks.iter().map(|t| Money::from_picos(1000 + t[4..].parse::<u64>().unwrap())).sum();
        prop_assert_eq!(r.meta_cost, meta);
        if records.iter().any(|x| x.domain.is_none()) {
            prop_assert!(r.per_domain.contains_key(UNLABELLED));
        }
        prop_assert_eq!(r.to_csv().lines().count(), records.len() + 1);
    }
}

#[test]
fn log_round_trip_preserves_the_report() {
    let records: Vec<TrajectoryRecord> = (0..6).map(|i| record(i, BACKBONES[i % 3], ["yes", "no"][i % 2], Some("qa"), i == 5)).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.traj.jsonl");
    write_jsonl(&path, &records).unwrap();
    let back = read_trajectories(&path).unwrap();
    assert_eq!(back, records);
    assert_eq!(RunReport::from_records(&back).to_text(), RunReport::from_records(&records).to_text());
    let text = RunReport::from_records(&records).to_text();
    assert!(text.contains("success rate  50.00%"), "{text}");
    assert!(text.contains("error: generator produced nothing usable"));
}
