//! Shared fixtures for the benchmarks in `benches/`.

use mrta_core::ScenarioConfig;

/// Desk-scale scenario: 700 x 500, 60 tasks plus two spawns of 10.
pub fn desk(policy: &str, agents: u32, comm_range: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::from_yaml(
        "area: {width: 700, height: 500}
agents: {count: 10, comm_range: 150}
tasks: {initial: 60, dynamic_spawn: {count: 10, interval_s: 300, repetitions: 2}}
policy: {name: cbba}
max_sim_time: 30000
",
    )
    .expect("fixture config");
    c.policy.name = policy.into();
    c.agents.count = agents;
    c.agents.comm_range = comm_range;
    c
}
