#![allow(dead_code)]

use std::any::Any;

use mrta_core::engine::builtin_actions;
use mrta_core::*;

pub fn config(yaml: &str) -> ScenarioConfig {
    ScenarioConfig::from_yaml(yaml).expect("test config")
}

/// Small fast scenario: 300 x 200, 5 agents, a dozen tasks plus two spawns.
pub fn small(policy: &str, comm_range: f64, seed: u64) -> ScenarioConfig {
    let mut c = config(&format!(
        "area: {{width: 300, height: 200}}
agents: {{count: 5, comm_range: {comm_range}, sa_range: 120, max_speed: 1.0, max_accel: 0.1}}
tasks: {{initial: 12, workload_range: [2, 12], dynamic_spawn: {{count: 3, interval_s: 60, repetitions: 2}}}}
policy: {{name: {policy}}}
max_sim_time: 5000
"
    ));
    c.seed = seed;
    c
}

/// Takes the nearest open task it can see, with no deliberation.
pub struct Nearest;

impl Policy for Nearest {
    fn name(&self) -> &str {
        "nearest"
    }

    fn decide(&mut self, ctx: &mut DecisionContext<'_>) -> DecisionOutcome {
        let me = ctx.agent.position;
        ctx.open_tasks()
            .min_by(|a, b| distance(me, a.position).total_cmp(&distance(me, b.position)))
            .map(|v| DecisionOutcome::assigned(v.task_id))
            .unwrap_or_else(DecisionOutcome::no_task)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

pub fn registry_with_nearest() -> PolicyRegistry {
    let mut r = PolicyRegistry::with_builtins();
    r.register("nearest", |_, _| Box::new(Nearest)).unwrap();
    r
}

/// Simulation whose config names the `nearest` policy.
pub fn nearest_sim(mut config: ScenarioConfig) -> Simulation {
    config.policy.name = "nearest".into();
    Simulation::with_parts(&config, &registry_with_nearest(), builtin_actions(), None).unwrap()
}

/// Put agents and tasks where a test wants them.
pub fn place(sim: &mut Simulation, agents: &[(f64, f64)], tasks: &[(f64, f64, f64)]) {
    let w = sim.world_mut();
    assert_eq!(w.agents.len(), agents.len());
    for (a, &(x, y)) in w.agents.iter_mut().zip(agents) {
        a.position = Vec2::new(x, y);
    }
    let ts = std::sync::Arc::make_mut(&mut w.tasks);
    ts.clear();
    for (i, &(x, y, load)) in tasks.iter().enumerate() {
        ts.push(TaskState::new(i as TaskId, Vec2::new(x, y), load, 0.0));
    }
}

/// Step an episode to the end, checking every per-tick invariant.
pub fn check_invariants(mut sim: Simulation) -> Termination {
    let dt = sim.config().dt();
    let spawned = |s: &Simulation| s.world().tasks.iter().map(|t| t.initial_workload).sum::<f64>();
    while sim.termination().is_none() {
        let before = sim.world().clone();
        sim.step();
        let after = sim.world();
        for (a0, a1) in before.agents.iter().zip(&after.agents) {
            let v = a1.velocity.norm();
            assert!(v <= a1.max_speed + 1e-9, "speed {v}");
            assert!((a1.velocity - a0.velocity).norm() <= a1.max_accel * dt + 1e-9, "accel");
            assert!(distance(a0.position, a1.position) <= a1.max_speed * dt + 1e-9, "displacement");
            assert!(a1.distance_traveled >= a0.distance_traveled);
            assert!(a1.workload_done >= a0.workload_done);
        }
        for (t0, t1) in before.tasks.iter().zip(after.tasks.iter()) {
            assert_eq!(t0.id, t1.id);
            assert!(t1.workload <= t0.workload);
            assert!(!t0.completed || t1.completed, "completion is absorbing");
        }
        for t in after.tasks.iter() {
            assert_eq!(t.completed, t.workload == 0.0);
        }
        let done: f64 = after.agents.iter().map(|a| a.workload_done).sum();
        let total = spawned(&sim);
        let remaining: f64 = after.tasks.iter().map(|t| t.workload).sum();
        assert!((done - (total - remaining)).abs() <= 1e-6 * total.max(1.0), "conservation");

        for (i, a) in after.agents.iter().enumerate() {
            // one-tick latency: only what in-range neighbors shared last tick
            let mut expected: Vec<(AgentId, u64)> = before
                .agents
                .iter()
                .filter(|o| o.id != a.id && distance(o.position, before.agents[i].position) <= a.comm_range)
                .filter_map(|o| o.message_to_share.as_ref().map(|m| (o.id, m.tick)))
                .collect();
            let mut got: Vec<(AgentId, u64)> = a.messages_received.iter().map(|m| (m.sender_id, m.tick)).collect();
            expected.sort();
            got.sort();
            assert_eq!(got, expected);
            assert!(got.iter().all(|&(_, t)| t + 1 == before.tick));

            // perception is exactly the r_p disc at the start of the tick
            let mut seen: Vec<TaskId> = sim.blackboard(i).local_tasks.iter().map(|v| v.task_id).collect();
            let mut within: Vec<TaskId> = before
                .tasks
                .iter()
                .filter(|t| distance(t.position, before.agents[i].position) <= a.sa_range)
                .map(|t| t.id)
                .collect();
            seen.sort();
            within.sort();
            assert_eq!(seen, within);
        }
    }
    let r = sim.result();
    if r.terminated == Termination::AllTasksDone {
        assert!((r.total_workload() - r.spawned_workload).abs() <= 1e-6 * r.spawned_workload);
    }
    r.terminated
}
