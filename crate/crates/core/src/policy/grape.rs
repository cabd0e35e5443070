//! GRAPE: task allocation as an anonymous hedonic game.
//!
//! Agents share a partition of themselves into task coalitions. Each agent
//! moves itself to the coalition that maximizes its utility, bumps the
//! partition's evolution counter and broadcasts. Received partitions are
//! reconciled by a distributed mutex: the most evolved partition wins.
//!
//! Additions for dynamic task streams:
//! - each agent seeds an initial partition (itself, and neighbors whose
//!   assignment it does not know, on their nearest task) at start-up and
//!   after finishing its task;
//! - convergence is judged locally: the agent is satisfied when the mutex
//!   leaves its partition unchanged;
//! - the utility carries a social-inhibition exponent so crowding a task is
//!   penalized: `u = R / |S| - c * |S|^f_s`.

use std::any::Any;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde_json::{json, Value};

use super::{int_keyed, two_phase_decide, DecisionContext, DecisionOutcome, DomainError, Policy, TaskMemory, TwoPhase};
use crate::config::PolicyParams;
use crate::types::{distance, AgentId, MessageBody, MessagePayload, TaskId, Vec2};

/// Agent utility for joining (or staying in) a coalition of
/// `coalition_size` agents, the agent itself included.
pub fn grape_utility(reward: f64, cost: f64, coalition_size: usize, social_inhibition: f64) -> Result<f64, DomainError> {
    if coalition_size < 1 {
        return Err(DomainError::new("coalition size must be at least 1"));
    }
    let n = coalition_size as f64;
    Ok(reward / n - cost * n.powf(social_inhibition))
}

/// Task → coalition. Agents absent from every coalition are unassigned.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partition {
    coalitions: BTreeMap<TaskId, BTreeSet<AgentId>>,
}

impl Partition {
    pub fn coalition_of(&self, agent: AgentId) -> Option<TaskId> {
        self.coalitions
            .iter()
            .find(|(_, members)| members.contains(&agent))
            .map(|(t, _)| *t)
    }

    pub fn members(&self, task: TaskId) -> Option<&BTreeSet<AgentId>> {
        self.coalitions.get(&task)
    }

    pub fn size(&self, task: TaskId) -> usize {
        self.coalitions.get(&task).map_or(0, BTreeSet::len)
    }

    /// Move `agent` into `task`'s coalition, leaving any previous one.
    pub fn assign(&mut self, agent: AgentId, task: TaskId) {
        self.unassign(agent);
        self.coalitions.entry(task).or_default().insert(agent);
    }

    pub fn unassign(&mut self, agent: AgentId) {
        self.coalitions.retain(|_, m| {
            m.remove(&agent);
            !m.is_empty()
        });
    }

    pub fn remove_task(&mut self, task: TaskId) {
        self.coalitions.remove(&task);
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskId, &BTreeSet<AgentId>)> {
        self.coalitions.iter().map(|(t, m)| (*t, m))
    }

    pub fn to_json(&self) -> Value {
        Value::Object(
            self.coalitions
                .iter()
                .map(|(t, m)| (t.to_string(), json!(m.iter().collect::<Vec<_>>())))
                .collect(),
        )
    }

    fn from_body(body: &MessageBody) -> Partition {
        let mut p = Partition::default();
        for (task, members) in int_keyed(body, "partition") {
            let set: BTreeSet<AgentId> = members
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(|v| v.as_u64().map(|a| a as AgentId))
                .collect();
            if !set.is_empty() {
                p.coalitions.insert(task, set);
            }
        }
        p
    }
}

/// Per-agent GRAPE memory.
#[derive(Debug, Clone)]
pub struct GrapeState {
    pub partition: Partition,
    /// Evolution counter r.
    pub evolution: u64,
    /// Random tie-break, redrawn at every local evolution.
    pub stamp: f64,
    pub satisfied: bool,
    pub social_inhibition: f64,
    pub memory: TaskMemory,
    initialized: bool,
}

pub struct GrapePolicy {
    id: AgentId,
    pub state: GrapeState,
}

fn mutex_order(a: (u64, f64, AgentId), b: (u64, f64, AgentId)) -> Ordering {
    a.0.cmp(&b.0)
        .then(a.1.total_cmp(&b.1))
        // lower sender id ranks higher
        .then(b.2.cmp(&a.2))
}

impl GrapePolicy {
    pub fn new(id: AgentId, params: &PolicyParams) -> Self {
        GrapePolicy {
            id,
            state: GrapeState {
                partition: Partition::default(),
                evolution: 0,
                stamp: 0.0,
                satisfied: false,
                social_inhibition: params.social_inhibition,
                memory: TaskMemory::default(),
                initialized: false,
            },
        }
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn my_task(&self) -> Option<TaskId> {
        self.state.partition.coalition_of(self.id)
    }

    fn evolve(&mut self, ctx: &mut DecisionContext<'_>) {
        self.state.evolution += 1;
        self.state.stamp = ctx.rng.random::<f64>();
    }

    /// Utility of `task` for this agent under the current partition,
    /// counting the agent as a member.
    pub fn utility_of(&self, ctx: &DecisionContext<'_>, task: TaskId, position: Vec2, initial_workload: f64) -> f64 {
        let members = self.state.partition.size(task);
        let inside = self.state.partition.members(task).is_some_and(|m| m.contains(&self.id));
        let size = if inside { members } else { members + 1 };
        let cost = ctx.cost(distance(ctx.agent.position, position));
        grape_utility(ctx.reward(initial_workload), cost, size, self.state.social_inhibition)
            .expect("size counts the agent itself")
    }

    fn current_utility(&self, ctx: &DecisionContext<'_>) -> f64 {
        self.my_task()
            .and_then(|t| self.state.memory.get(t).map(|info| (t, info)))
            .map_or(f64::NEG_INFINITY, |(t, info)| {
                self.utility_of(ctx, t, info.position, info.initial_workload)
            })
    }

    /// Seed self, and neighbors whose assignment is unknown here, on their
    /// nearest open local task.
    pub fn initial_partition(&mut self, ctx: &mut DecisionContext<'_>) {
        let nearest = |from: Vec2| {
            ctx.open_tasks()
                .min_by(|a, b| {
                    distance(from, a.position)
                        .total_cmp(&distance(from, b.position))
                        .then(a.task_id.cmp(&b.task_id))
                })
                .map(|t| t.task_id)
        };
        let mut seeded = false;
        if let Some(t) = nearest(ctx.agent.position) {
            self.state.partition.assign(self.id, t);
            seeded = true;
        }
        for msg in ctx.messages_received {
            let Some(pos) = sender_position(&msg.body) else { continue };
            if msg.sender_id == self.id || self.state.partition.coalition_of(msg.sender_id).is_some() {
                continue;
            }
            if let Some(t) = nearest(pos) {
                self.state.partition.assign(msg.sender_id, t);
                seeded = true;
            }
        }
        if seeded {
            self.evolve(ctx);
        }
    }

    fn outbox(&self, ctx: &DecisionContext<'_>) -> MessageBody {
        let mut body = MessageBody::new();
        body.insert("partition".into(), self.state.partition.to_json());
        body.insert("r".into(), json!(self.state.evolution));
        body.insert("stamp".into(), json!(self.state.stamp));
        body.insert("position".into(), json!([ctx.agent.position.x, ctx.agent.position.y]));
        body
    }

    /// Adopt the most evolved partition among our own and the received
    /// ones. Returns true when our partition came through unchanged.
    pub fn mutex(&mut self, messages: &[MessagePayload]) -> bool {
        let before = self.state.partition.clone();
        let mut best = (self.state.evolution, self.state.stamp, self.id);
        let mut winner: Option<&MessagePayload> = None;
        for m in messages {
            let Some(r) = m.body.get("r").and_then(Value::as_u64) else { continue };
            let stamp = m.body.get("stamp").and_then(Value::as_f64).unwrap_or(0.0);
            let key = (r, stamp, m.sender_id);
            if mutex_order(key, best) == Ordering::Greater {
                best = key;
                winner = Some(m);
            }
        }
        if let Some(m) = winner {
            let mut adopted = Partition::from_body(&m.body);
            adopted.coalitions.retain(|t, _| !self.state.memory.is_completed(*t));
            self.state.partition = adopted;
            self.state.evolution = best.0;
            self.state.stamp = best.1;
        }
        self.state.partition == before
    }
}

fn sender_position(body: &MessageBody) -> Option<Vec2> {
    let arr = body.get("position")?.as_array()?;
    Some(Vec2::new(arr.first()?.as_f64()?, arr.get(1)?.as_f64()?))
}

impl TwoPhase for GrapePolicy {
    fn satisfied(&self) -> bool {
        self.state.satisfied
    }

    fn set_satisfied(&mut self, satisfied: bool) {
        self.state.satisfied = satisfied;
    }

    fn post_process(&mut self, ctx: &mut DecisionContext<'_>) {
        let obs = self.state.memory.observe(ctx.local_tasks);
        let mine = self.my_task();
        let mut own_done = false;
        for t in &obs.newly_completed {
            own_done |= mine == Some(*t);
            self.state.partition.remove_task(*t);
        }
        if !self.state.initialized || own_done {
            self.initial_partition(ctx);
            self.state.initialized = true;
            self.state.satisfied = false;
        }
        if !obs.new_open.is_empty() {
            self.state.satisfied = false;
        }
    }

    fn local_decision(&mut self, ctx: &mut DecisionContext<'_>) -> MessageBody {
        // build on the most evolved partition heard this tick
        self.mutex(ctx.messages_received);
        let current = self.current_utility(ctx);
        let mut best: Option<(TaskId, f64)> = None;
        for t in ctx.open_tasks() {
            let u = self.utility_of(ctx, t.task_id, t.position, t.initial_workload);
            if best.is_none_or(|(_, bu)| u > bu) {
                best = Some((t.task_id, u));
            }
        }
        if let Some((task, u)) = best {
            if u > current && self.my_task() != Some(task) {
                self.state.partition.assign(self.id, task);
                self.evolve(ctx);
            }
        }
        self.outbox(ctx)
    }

    fn conflict_mitigation(&mut self, ctx: &mut DecisionContext<'_>) -> bool {
        let unchanged = self.mutex(ctx.messages_received);
        unchanged && self.my_task().is_some_and(|t| self.state.memory.get(t).is_some())
    }

    fn assigned_task(&self) -> Option<TaskId> {
        self.my_task()
    }
}

impl Policy for GrapePolicy {
    fn name(&self) -> &str {
        "grape"
    }

    fn decide(&mut self, ctx: &mut DecisionContext<'_>) -> DecisionOutcome {
        two_phase_decide(self, ctx)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
