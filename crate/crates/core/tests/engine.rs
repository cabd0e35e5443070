mod common;

use std::collections::BTreeMap;

use common::*;
use mrta_core::engine::{run_to_dir, AGENTS_FINAL_CSV, EPISODE_CSV, TIMESERIES_CSV, TRACE_JSONL};
use mrta_core::*;

const SOLO: &str = "area: {width: 100, height: 100}
agents: {count: 1, comm_range: 50, max_speed: 100, max_accel: 100}
tasks: {initial: 1, workload_range: [3, 3]}
policy: {name: fcg}
max_sim_time: 1000
";

fn work_ticks(sim: &mut Simulation, task: usize) -> (u64, Vec<u64>) {
    let mut worked = Vec::new();
    while sim.termination().is_none() {
        let before = sim.world().tasks[task].workload;
        let tick = sim.world().tick;
        sim.step();
        if sim.world().tasks[task].workload < before {
            worked.push(tick);
        }
    }
    (sim.world().tick, worked)
}

#[test]
fn single_task_takes_workload_over_work_rate_ticks_after_arrival() {
    let mut sim = Simulation::new(&config(SOLO)).unwrap();
    place(&mut sim, &[(10.0, 50.0)], &[(20.0, 50.0, 3.0)]);
    let (_, worked) = work_ticks(&mut sim, 0);
    assert_eq!(worked.len(), 3);
    assert_eq!(worked[2] - worked[0], 2, "contiguous work ticks: {worked:?}");
    assert_eq!(sim.termination(), Some(Termination::AllTasksDone));
    assert_eq!(sim.world().agents[0].workload_done, 3.0);
}

#[test]
fn co_working_agents_add_their_rates() {
    let mut c = config(SOLO);
    c.agents.count = 2;
    let mut sim = nearest_sim(c);
    place(&mut sim, &[(50.0, 50.0), (51.0, 50.0)], &[(50.0, 51.0, 10.0)]);
    let (end, worked) = work_ticks(&mut sim, 0);
    assert_eq!(worked.len(), 5);
    assert_eq!(end, 5);
    for a in &sim.world().agents {
        assert_eq!(a.workload_done, 5.0);
    }
}

#[test]
fn co_located_workload_six_immediate_policy() {
    let mut sim = nearest_sim(config(SOLO));
    place(&mut sim, &[(50.0, 50.0)], &[(50.0, 50.0, 6.0)]);
    let r = sim.run_to_end();
    assert_eq!(r.terminated, Termination::AllTasksDone);
    assert_eq!(r.mission_time, 6.0);
}

#[test]
fn co_located_workload_six_builtins_spend_one_tick_deliberating() {
    for policy in ["cbba", "grape", "fcg"] {
        let mut c = config(SOLO);
        c.policy.name = policy.into();
        let mut sim = Simulation::new(&c).unwrap();
        place(&mut sim, &[(50.0, 50.0)], &[(50.0, 50.0, 6.0)]);
        let r = sim.run_to_end();
        assert_eq!(r.mission_time, 7.0, "{policy}");
    }
}

#[test]
fn zero_agents_hit_the_time_limit() {
    let mut c = config(SOLO);
    c.agents.count = 0;
    let sim = Simulation::new(&c).unwrap();
    assert_eq!(sim.termination(), Some(Termination::TimeLimit));
    let r = sim.run_to_end();
    assert_eq!(r.terminated, Termination::TimeLimit);
    assert!(r.agents.is_empty());
}

#[test]
fn time_limit_when_budget_too_small() {
    let mut c = small("cbba", 100.0, 3);
    c.max_sim_time = 20.0;
    let r = run(&c, 3).unwrap();
    assert_eq!(r.terminated, Termination::TimeLimit);
    assert_eq!(r.mission_time, 20.0);
}

#[test]
fn same_seed_gives_identical_files() {
    let reg = PolicyRegistry::with_builtins();
    for policy in ["cbba", "grape", "fcg"] {
        let mut c = small(policy, 100.0, 11);
        c.trace.enabled = true;
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_to_dir(&c, &reg, None, a.path()).unwrap();
        run_to_dir(&c, &reg, None, b.path()).unwrap();
        for f in [EPISODE_CSV, AGENTS_FINAL_CSV, TIMESERIES_CSV, TRACE_JSONL] {
            let x = std::fs::read(a.path().join(f)).unwrap();
            assert!(!x.is_empty());
            assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{policy} {f}");
        }
    }
}

#[test]
fn different_seeds_differ() {
    let a = run(&small("fcg", 100.0, 0), 1).unwrap();
    let b = run(&small("fcg", 100.0, 0), 2).unwrap();
    assert_ne!(a.agents, b.agents);
}

#[test]
fn table_one_spawn_schedule() {
    let mut c = ScenarioConfig::load(std::path::Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/table1.yaml"))).unwrap();
    assert_eq!(c.tasks.total_count(), 400);
    assert!((c.tasks.expected_total_workload() - 13_200.0).abs() < 1e-9);
    // one slow-moving agent that sees nothing keeps the episode cheap
    c.agents.count = 1;
    c.agents.sa_range = 1.0;
    let mut sim = Simulation::new(&c).unwrap();
    let mut counts = BTreeMap::new();
    for _ in 0..3001 {
        sim.step();
        counts.insert(sim.world().tick, sim.world().tasks.len());
    }
    assert_eq!(counts[&999], 250);
    assert_eq!(counts[&1000], 300);
    assert_eq!(counts[&2000], 350);
    assert_eq!(counts[&3000], 400);
    assert_eq!(counts[&3001], 400);
    let tasks = &sim.world().tasks;
    assert!(tasks.windows(2).all(|w| w[0].id < w[1].id));
    assert_eq!(tasks[300].spawn_time, 2000.0);
    for t in tasks.iter() {
        assert!((6.0..=60.0).contains(&t.initial_workload));
        assert!((0.0..=1400.0).contains(&t.position.x) && (0.0..=1000.0).contains(&t.position.y));
    }
}

#[test]
fn no_repetitions_keeps_the_task_count() {
    let mut c = small("fcg", 100.0, 5);
    c.tasks.dynamic_spawn.repetitions = 0;
    let mut sim = Simulation::new(&c).unwrap();
    for _ in 0..200 {
        sim.step();
        assert_eq!(sim.world().tasks.len(), 12);
    }
}

fn explorer(seed: u64) -> Simulation {
    let mut c = config(
        "area: {width: 1000, height: 800}
agents: {count: 1, comm_range: 10, sa_range: 5, max_speed: 5, max_accel: 1}
tasks: {initial: 1}
policy: {name: fcg, exploration_duration: 50}
max_sim_time: 2000
",
    );
    c.seed = seed;
    let mut sim = nearest_sim(c);
    // a task nobody will stumble on keeps the episode open
    let p = sim.world().agents[0].position;
    place(&mut sim, &[(p.x, p.y)], &[(1000.0, 800.0, 5.0)]);
    sim
}

fn waypoints(sim: &mut Simulation, ticks: usize) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::new();
    for _ in 0..ticks {
        sim.step();
        if let Some(leg) = sim.blackboard(0).exploration_target {
            if out.last() != Some(&leg.target) {
                out.push(leg.target);
            }
        }
    }
    out
}

#[test]
fn exploration_waypoints_stay_in_bounds_and_repeat_per_seed() {
    let a = waypoints(&mut explorer(4), 1500);
    assert!(a.len() > 5, "{}", a.len());
    for p in &a {
        assert!((0.0..=1000.0).contains(&p.x) && (0.0..=800.0).contains(&p.y));
    }
    assert_eq!(a, waypoints(&mut explorer(4), 1500));
    assert_ne!(a, waypoints(&mut explorer(5), 1500));
}

#[test]
fn perceiving_a_task_ends_exploration() {
    let mut sim = explorer(1);
    for _ in 0..20 {
        sim.step();
    }
    assert!(sim.blackboard(0).exploration_target.is_some());
    let p = sim.world().agents[0].position;
    let w = sim.world_mut();
    let tasks = std::sync::Arc::make_mut(&mut w.tasks);
    tasks.push(TaskState::new(1, Vec2::new(p.x + 1.0, p.y), 5.0, 20.0));
    sim.step();
    assert!(sim.blackboard(0).exploration_target.is_none());
    assert_eq!(sim.world().agents[0].assigned_task, Some(1));
}
