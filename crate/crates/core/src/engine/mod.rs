//! The episode loop.
//!
//! Each step: deliver last tick's messages, snapshot perception, tick every
//! agent's tree in id order against that snapshot, move, work, complete,
//! spawn, record. Agents only ever see the snapshot, so the order in which
//! they are ticked does not change the outcome.

mod actions;
mod kinematics;
mod output;
mod work;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde_json::json;
use thiserror::Error;

use crate::btree::{parse_bt_xml, tick, ActionRegistry, Blackboard, BtError, BtNode, NodeStatus};
use crate::comms::{build_neighbor_graph, exchange_messages, snapshot_local_tasks};
use crate::config::{ConfigError, ScenarioConfig};
use crate::policy::{Policy, PolicyError, PolicyRegistry};
use crate::rng::{SeedTree, StreamRng, AGENT_PLACEMENT, EXPLORATION, POLICY, TASK_PLACEMENT};
use crate::types::{AgentId, AgentState, TaskId, TaskState, Vec2};

pub use actions::{
    builtin_actions, decision_making, exploration, local_sensing, task_execution, Brain, TickCtx,
};
pub use kinematics::{integrate_motion, wrap_angle};
pub use output::{write_episode, AGENTS_FINAL_CSV, EPISODE_CSV, TIMESERIES_CSV, TRACE_JSONL};
pub use work::apply_work;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("behavior tree: {0}")]
    Bt(#[from] BtError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    AllTasksDone,
    TimeLimit,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::AllTasksDone => "AllTasksDone",
            Termination::TimeLimit => "TimeLimit",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Termination {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "AllTasksDone" => Ok(Termination::AllTasksDone),
            "TimeLimit" => Ok(Termination::TimeLimit),
            other => Err(format!("unknown termination `{other}`")),
        }
    }
}

/// One row of the time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub time: f64,
    pub tasks_remaining: usize,
    pub workload_remaining: f64,
    pub agents_distance_sum: f64,
    pub agents_workload_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentFinal {
    pub agent_id: AgentId,
    pub distance_traveled: f64,
    pub workload_done: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub seed: u64,
    pub policy: String,
    pub n_agents: u32,
    pub comm_range: f64,
    pub mission_time: f64,
    pub terminated: Termination,
    pub agents: Vec<AgentFinal>,
    pub timeseries: Vec<MetricsRow>,
    /// Sum of initial workloads of every task ever spawned.
    pub spawned_workload: f64,
}

impl EpisodeResult {
    pub fn total_distance(&self) -> f64 {
        self.agents.iter().map(|a| a.distance_traveled).sum()
    }

    pub fn total_workload(&self) -> f64 {
        self.agents.iter().map(|a| a.workload_done).sum()
    }
}

/// Mutable world state.
#[derive(Debug, Clone)]
pub struct World {
    pub tick: u64,
    pub agents: Vec<AgentState>,
    /// Indexed by task id.
    pub tasks: Arc<Vec<TaskState>>,
    pub spawns_remaining: u32,
    spawns_done: u32,
}

impl World {
    pub fn open_tasks(&self) -> impl Iterator<Item = &TaskState> {
        self.tasks.iter().filter(|t| !t.completed)
    }
}

/// A running episode.
pub struct Simulation {
    config: ScenarioConfig,
    world: World,
    brains: Vec<Option<Brain>>,
    blackboards: Vec<Blackboard>,
    tree: BtNode,
    actions: Arc<ActionRegistry<TickCtx>>,
    params: Arc<crate::config::PolicyParams>,
    task_rng: StreamRng,
    timeseries: Vec<MetricsRow>,
    trace: Option<Box<dyn Write + Send>>,
    termination: Option<Termination>,
    spawned_workload: f64,
}

impl Simulation {
    /// Built-in policies and actions; the tree comes from the config's
    /// `bt_xml_path` or is the default tree.
    pub fn new(config: &ScenarioConfig) -> Result<Self, EngineError> {
        Self::with_parts(config, &PolicyRegistry::with_builtins(), builtin_actions(), None)
    }

    pub fn with_parts(
        config: &ScenarioConfig,
        policies: &PolicyRegistry,
        actions: ActionRegistry<TickCtx>,
        tree: Option<BtNode>,
    ) -> Result<Self, EngineError> {
        let tree = match (tree, &config.bt_xml_path) {
            (Some(t), _) => t,
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|source| EngineError::Io {
                    path: path.clone(),
                    source,
                })?;
                parse_bt_xml(&text)?
            }
            (None, None) => BtNode::default_tree(),
        };
        actions.check_tree(&tree)?;

        let seeds = SeedTree::new(config.seed);
        let mut task_rng = seeds.stream(TASK_PLACEMENT);
        let mut tasks = Vec::new();
        let mut spawned_workload = 0.0;
        spawn_into(&mut tasks, config, config.tasks.initial, 0.0, &mut task_rng, &mut spawned_workload);

        let mut agent_rng = seeds.stream(AGENT_PLACEMENT);
        let ap = &config.agents;
        let agents: Vec<AgentState> = (0..ap.count)
            .map(|id| AgentState {
                id,
                position: random_point(&mut agent_rng, config),
                velocity: Vec2::ZERO,
                rotation: 0.0,
                max_speed: ap.max_speed,
                max_accel: ap.max_accel,
                max_angular_speed: ap.max_angular_speed,
                work_rate: ap.work_rate,
                comm_range: ap.comm_range,
                sa_range: ap.sa_range,
                message_to_share: None,
                messages_received: Vec::new(),
                assigned_task: None,
                distance_traveled: 0.0,
                workload_done: 0.0,
            })
            .collect();
        let brains = agents
            .iter()
            .map(|a| {
                Ok(Some(Brain {
                    policy: policies.create(a.id, &config.policy)?,
                    policy_rng: seeds.sub_stream(POLICY, a.id as u64),
                    explore_rng: seeds.sub_stream(EXPLORATION, a.id as u64),
                }))
            })
            .collect::<Result<Vec<_>, PolicyError>>()?;

        let mut sim = Simulation {
            blackboards: vec![Blackboard::default(); agents.len()],
            world: World {
                tick: 0,
                agents,
                tasks: Arc::new(tasks),
                spawns_remaining: config.tasks.dynamic_spawn.repetitions,
                spawns_done: 0,
            },
            brains,
            tree,
            actions: Arc::new(actions),
            params: Arc::new(config.policy.clone()),
            config: config.clone(),
            task_rng,
            timeseries: Vec::new(),
            trace: None,
            termination: None,
            spawned_workload,
        };
        sim.record();
        if sim.world.agents.is_empty() {
            sim.termination = Some(Termination::TimeLimit);
        } else if sim.all_done() {
            sim.termination = Some(Termination::AllTasksDone);
        }
        Ok(sim)
    }

    /// Write one JSON line per traced tick to `sink`.
    pub fn set_trace(&mut self, sink: Box<dyn Write + Send>) {
        self.trace = Some(sink);
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    /// Seconds elapsed.
    pub fn time(&self) -> f64 {
        self.world.tick as f64 / self.config.sim_rate
    }

    pub fn blackboard(&self, index: usize) -> &Blackboard {
        &self.blackboards[index]
    }

    pub fn policy(&self, index: usize) -> &dyn Policy {
        self.brains[index].as_ref().expect("brain present between steps").policy.as_ref()
    }

    pub fn policy_mut(&mut self, index: usize) -> &mut dyn Policy {
        self.brains[index].as_mut().expect("brain present between steps").policy.as_mut()
    }

    /// Direct world access for building fixtures.
    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    fn all_done(&self) -> bool {
        self.world.spawns_remaining == 0 && self.world.tasks.iter().all(|t| t.completed)
    }

    fn record(&mut self) {
        let tasks = &self.world.tasks;
        self.timeseries.push(MetricsRow {
            time: self.time(),
            tasks_remaining: tasks.iter().filter(|t| !t.completed).count(),
            workload_remaining: tasks.iter().map(|t| t.workload).sum(),
            agents_distance_sum: self.world.agents.iter().map(|a| a.distance_traveled).sum(),
            agents_workload_sum: self.world.agents.iter().map(|a| a.workload_done).sum(),
        });
    }

    /// Advance one tick. Returns the termination reason once reached; further
    /// calls do nothing.
    pub fn step(&mut self) -> Option<Termination> {
        if self.termination.is_some() {
            return self.termination;
        }
        let dt = self.config.dt();
        let tick_now = self.world.tick;
        let time_now = self.time();

        let graph = build_neighbor_graph(&self.world.agents);
        exchange_messages(&mut self.world.agents, &graph);

        let n = self.world.agents.len();
        let mut targets: Vec<Option<Vec2>> = vec![None; n];
        let mut working_on: Vec<Option<TaskId>> = vec![None; n];
        let mut trace_agents = Vec::new();
        let tracing = self.trace.is_some() && tick_now % self.config.trace.every == 0;
        for i in 0..n {
            let agent = &mut self.world.agents[i];
            let local_tasks = snapshot_local_tasks(agent, &self.world.tasks);
            let messages = std::mem::take(&mut agent.messages_received);
            let mut snapshot = agent.clone();
            snapshot.messages_received = messages;
            let mut ctx = TickCtx {
                agent: snapshot,
                tasks: Arc::clone(&self.world.tasks),
                local_tasks,
                brain: self.brains[i].take().expect("brain present between steps"),
                params: Arc::clone(&self.params),
                area: self.config.area,
                tick: tick_now,
                time: time_now,
                sim_rate: self.config.sim_rate,
                outbox: None,
                move_target: None,
                working_on: None,
                decision: None,
            };
            let status = tick(&self.tree, &self.actions, &mut ctx, &mut self.blackboards[i])
                .expect("tree checked against the registry at construction");
            let bb = &mut self.blackboards[i];
            let agent = &mut self.world.agents[i];
            agent.messages_received = std::mem::take(&mut bb.messages_received);
            agent.message_to_share = ctx.outbox.take();
            agent.assigned_task = bb.assigned_task_id;
            targets[i] = ctx.move_target;
            working_on[i] = ctx.working_on;
            if tracing {
                trace_agents.push(json!({
                    "id": agent.id,
                    "x": agent.position.x,
                    "y": agent.position.y,
                    "status": status_str(status),
                    "decision": ctx.decision.map(|d| format!("{d:?}")),
                    "task": agent.assigned_task,
                    "message": agent.message_to_share.as_ref().map(|m| m.body.as_ref().clone()),
                }));
            }
            self.brains[i] = Some(ctx.brain);
        }
        for (agent, target) in self.world.agents.iter_mut().zip(&targets) {
            integrate_motion(agent, *target, dt);
        }
        let tasks = Arc::make_mut(&mut self.world.tasks);
        apply_work(
            &mut self.world.agents,
            &working_on,
            tasks,
            self.config.policy.arrival_radius,
            dt,
        );

        self.world.tick += 1;
        let now = self.time();
        let sp = self.config.tasks.dynamic_spawn;
        if self.world.spawns_remaining > 0 && now >= sp.interval_s * (self.world.spawns_done + 1) as f64 {
            spawn_into(
                Arc::make_mut(&mut self.world.tasks),
                &self.config,
                sp.count,
                now,
                &mut self.task_rng,
                &mut self.spawned_workload,
            );
            self.world.spawns_remaining -= 1;
            self.world.spawns_done += 1;
        }

        if self.all_done() {
            self.termination = Some(Termination::AllTasksDone);
        } else if now >= self.config.max_sim_time {
            self.termination = Some(Termination::TimeLimit);
        }
        if self.termination.is_some() || self.world.tick % self.config.trace.every == 0 {
            self.record();
        }
        if tracing {
            self.write_trace(tick_now, time_now, trace_agents);
        }
        self.termination
    }

    fn write_trace(&mut self, tick: u64, time: f64, agents: Vec<serde_json::Value>) {
        let tasks: Vec<serde_json::Value> = self
            .world
            .open_tasks()
            .map(|t| json!({"id": t.id, "x": t.position.x, "y": t.position.y, "workload": t.workload}))
            .collect();
        let line = json!({"tick": tick, "time": time, "agents": agents, "tasks": tasks});
        if let Some(sink) = self.trace.as_mut() {
            // a broken trace sink must not abort the episode
            let _ = serde_json::to_writer(&mut *sink, &line);
            let _ = sink.write_all(b"\n");
        }
    }

    /// Step until termination and summarize.
    pub fn run_to_end(mut self) -> EpisodeResult {
        while self.step().is_none() {}
        if let Some(sink) = self.trace.as_mut() {
            let _ = sink.flush();
        }
        self.result()
    }

    pub fn result(&self) -> EpisodeResult {
        EpisodeResult {
            seed: self.config.seed,
            policy: self.config.policy.name.clone(),
            n_agents: self.config.agents.count,
            comm_range: self.config.agents.comm_range,
            mission_time: self.time(),
            terminated: self.termination.unwrap_or(Termination::TimeLimit),
            agents: self
                .world
                .agents
                .iter()
                .map(|a| AgentFinal {
                    agent_id: a.id,
                    distance_traveled: a.distance_traveled,
                    workload_done: a.workload_done,
                })
                .collect(),
            timeseries: self.timeseries.clone(),
            spawned_workload: self.spawned_workload,
        }
    }
}

fn status_str(s: NodeStatus) -> &'static str {
    match s {
        NodeStatus::Success => "Success",
        NodeStatus::Failure => "Failure",
        NodeStatus::Running => "Running",
    }
}

fn random_point(rng: &mut StreamRng, config: &ScenarioConfig) -> Vec2 {
    Vec2::new(
        rng.random_range(0.0..=config.area.width),
        rng.random_range(0.0..=config.area.height),
    )
}

fn spawn_into(
    tasks: &mut Vec<TaskState>,
    config: &ScenarioConfig,
    count: u32,
    time: f64,
    rng: &mut StreamRng,
    spawned_workload: &mut f64,
) {
    for _ in 0..count {
        let id = tasks.len() as TaskId;
        let position = random_point(rng, config);
        let workload = rng.random_range(config.tasks.workload_lo..=config.tasks.workload_hi);
        *spawned_workload += workload;
        tasks.push(TaskState::new(id, position, workload, time));
    }
}

/// Run one episode with the built-in policies and tree.
pub fn run(config: &ScenarioConfig, seed: u64) -> Result<EpisodeResult, EngineError> {
    let mut config = config.clone();
    config.seed = seed;
    Ok(Simulation::new(&config)?.run_to_end())
}

/// Run one episode and write its CSVs (and trace, if enabled) into `dir`.
pub fn run_to_dir(
    config: &ScenarioConfig,
    policies: &PolicyRegistry,
    tree: Option<BtNode>,
    dir: &Path,
) -> Result<EpisodeResult, EngineError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EngineError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut sim = Simulation::with_parts(config, policies, builtin_actions(), tree)?;
    if config.trace.enabled {
        let path = dir.join(TRACE_JSONL);
        let file = std::fs::File::create(&path).map_err(io(&path))?;
        sim.set_trace(Box::new(std::io::BufWriter::new(file)));
    }
    let result = sim.run_to_end();
    write_episode(dir, &result).map_err(io(dir))?;
    Ok(result)
}
