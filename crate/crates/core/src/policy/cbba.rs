//! CBBA: consensus-based bundle algorithm.
//!
//! Each agent greedily builds a bundle of tasks it can outbid, scoring
//! paths with a time-discounted reward `S = sum_j lambda^tau_j * R_j`.
//! Neighbors exchange winners `y`, winning bids `z` and information
//! timestamps `s`, and resolve conflicts with the update / reset / leave
//! rule table. An agent that loses a task drops it and every task it added
//! afterwards.
//!
//! Additions for dynamic task streams: an agent whose bundle stays empty
//! for `starvation_timeout` seconds forgets every known winning bid, so a
//! task held by a stale bid from an agent that never shows up again can be
//! re-won.

use std::any::Any;
use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::{int_keyed, two_phase_decide, DecisionContext, DecisionOutcome, DomainError, Policy, TaskMemory, TwoPhase};
use crate::config::PolicyParams;
use crate::types::{distance, AgentId, MessageBody, MessagePayload, TaskId, Vec2};

/// One stop on a path, as far as scoring is concerned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStop {
    pub position: Vec2,
    pub workload: f64,
    pub reward: f64,
}

/// The agent-specific inputs of the path score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub start: Vec2,
    pub speed: f64,
    pub work_rate: f64,
}

fn check_discount(discount: f64) -> Result<(), DomainError> {
    if (0.0..=1.0).contains(&discount) {
        Ok(())
    } else {
        Err(DomainError::new(format!("discount {discount} outside [0, 1]")))
    }
}

/// Time-discounted reward of visiting `path` in order. The delay of a stop
/// is the travel time to it plus the work time of every earlier stop.
pub fn path_score(k: &Kinematics, path: &[PathStop], discount: f64) -> Result<f64, DomainError> {
    check_discount(discount)?;
    let mut tau = 0.0;
    let mut at = k.start;
    let mut score = 0.0;
    for stop in path {
        tau += distance(at, stop.position) / k.speed;
        score += discount.powf(tau) * stop.reward;
        tau += stop.workload / k.work_rate;
        at = stop.position;
    }
    Ok(score)
}

/// Best marginal gain of inserting `candidate` into `path`, and the
/// insertion index achieving it (earliest index on ties).
pub fn cbba_score(k: &Kinematics, path: &[PathStop], candidate: PathStop, discount: f64) -> Result<(f64, usize), DomainError> {
    let base = path_score(k, path, discount)?;
    let mut trial = Vec::with_capacity(path.len() + 1);
    let mut best = (f64::NEG_INFINITY, 0);
    for pos in 0..=path.len() {
        trial.clear();
        trial.extend_from_slice(&path[..pos]);
        trial.push(candidate);
        trial.extend_from_slice(&path[pos..]);
        let gain = path_score(k, &trial, discount)? - base;
        if gain > best.0 {
            best = (gain, pos);
        }
    }
    Ok(best)
}

/// Per-agent CBBA memory.
#[derive(Debug, Clone)]
pub struct CbbaState {
    /// Tasks in the order they were won.
    pub bundle: Vec<TaskId>,
    /// The same tasks in execution order.
    pub path: Vec<TaskId>,
    pub winning_bids: BTreeMap<TaskId, f64>,
    pub winning_agents: BTreeMap<TaskId, AgentId>,
    pub timestamps: BTreeMap<AgentId, u64>,
    /// Bid placed on each bundle task when it was added.
    pub own_bids: BTreeMap<TaskId, f64>,
    pub satisfied: bool,
    /// Seconds at which the bundle was last seen going empty.
    pub empty_bundle_since: Option<f64>,
    pub discount: f64,
    pub max_bundle: usize,
    pub starvation_timeout: Option<f64>,
    pub memory: TaskMemory,
    rebroadcast: bool,
}

pub struct CbbaPolicy {
    id: AgentId,
    pub state: CbbaState,
}

/// A decoded neighbor message.
struct View {
    sender: AgentId,
    tick: u64,
    y: BTreeMap<TaskId, AgentId>,
    z: BTreeMap<TaskId, f64>,
    s: BTreeMap<AgentId, u64>,
}

impl View {
    fn decode(msg: &MessagePayload) -> Self {
        View {
            sender: msg.sender_id,
            tick: msg.tick,
            y: int_keyed(&msg.body, "y")
                .filter_map(|(t, v)| v.as_u64().map(|a| (t, a as AgentId)))
                .collect(),
            z: int_keyed(&msg.body, "z").filter_map(|(t, v)| v.as_f64().map(|b| (t, b))).collect(),
            s: int_keyed(&msg.body, "s")
                .filter_map(|(a, v)| v.as_u64().map(|tick| (a as AgentId, tick)))
                .collect(),
        }
    }
}

enum Action {
    Update,
    Reset,
    Leave,
}

impl CbbaPolicy {
    pub fn new(id: AgentId, params: &PolicyParams) -> Self {
        CbbaPolicy {
            id,
            state: CbbaState {
                bundle: Vec::new(),
                path: Vec::new(),
                winning_bids: BTreeMap::new(),
                winning_agents: BTreeMap::new(),
                timestamps: BTreeMap::new(),
                own_bids: BTreeMap::new(),
                satisfied: false,
                empty_bundle_since: None,
                discount: params.discount,
                max_bundle: params.max_bundle.max(1) as usize,
                starvation_timeout: params.starvation_timeout,
                memory: TaskMemory::default(),
                rebroadcast: false,
            },
        }
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    fn z(&self, t: TaskId) -> f64 {
        self.state.winning_bids.get(&t).copied().unwrap_or(0.0)
    }

    fn clear_winner(&mut self, t: TaskId) {
        self.state.winning_agents.remove(&t);
        self.state.winning_bids.remove(&t);
    }

    fn forget_task(&mut self, t: TaskId) {
        self.clear_winner(t);
        self.state.bundle.retain(|&b| b != t);
        self.state.path.retain(|&p| p != t);
        self.state.own_bids.remove(&t);
    }

    fn stop(&self, ctx: &DecisionContext<'_>, t: TaskId) -> Option<PathStop> {
        self.state.memory.get(t).map(|info| PathStop {
            position: info.position,
            workload: info.workload_remaining,
            reward: ctx.reward(info.initial_workload),
        })
    }

    /// Greedily add outbiddable local tasks until the bundle is full.
    pub fn build_bundle(&mut self, ctx: &DecisionContext<'_>) {
        let k = Kinematics {
            start: ctx.agent.position,
            speed: ctx.agent.max_speed,
            work_rate: ctx.agent.work_rate,
        };
        while self.state.bundle.len() < self.state.max_bundle {
            let path: Vec<PathStop> = self.state.path.iter().filter_map(|&t| self.stop(ctx, t)).collect();
            // bids never rise along the bundle; without this the auction can cycle
            let ceiling = self
                .state
                .bundle
                .last()
                .and_then(|t| self.state.own_bids.get(t))
                .copied()
                .unwrap_or(f64::INFINITY);
            let mut best: Option<(TaskId, f64, usize)> = None;
            for view in ctx.open_tasks() {
                let t = view.task_id;
                if self.state.own_bids.contains_key(&t) || self.state.memory.is_completed(t) {
                    continue;
                }
                let candidate = PathStop {
                    position: view.position,
                    workload: view.workload_remaining,
                    reward: ctx.reward(view.initial_workload),
                };
                let (marginal, pos) = cbba_score(&k, &path, candidate, self.state.discount).expect("discount validated in config");
                let bid = marginal.min(ceiling);
                if bid <= 0.0 {
                    continue;
                }
                let z = self.z(t);
                let outbids = bid > z || (bid == z && self.state.winning_agents.get(&t).is_some_and(|&w| self.id < w));
                if outbids && best.is_none_or(|(_, b, _)| bid > b) {
                    best = Some((t, bid, pos));
                }
            }
            let Some((t, bid, pos)) = best else { break };
            self.state.bundle.push(t);
            self.state.path.insert(pos, t);
            self.state.own_bids.insert(t, bid);
            self.state.winning_agents.insert(t, self.id);
            self.state.winning_bids.insert(t, bid);
        }
    }

    fn outbox(&mut self, tick: u64) -> MessageBody {
        self.state.timestamps.insert(self.id, tick);
        let y: serde_json::Map<String, Value> =
            self.state.winning_agents.iter().map(|(t, a)| (t.to_string(), json!(a))).collect();
        let z: serde_json::Map<String, Value> = self
            .state
            .winning_agents
            .keys()
            .map(|t| (t.to_string(), json!(self.z(*t))))
            .collect();
        let s: serde_json::Map<String, Value> =
            self.state.timestamps.iter().map(|(a, tick)| (a.to_string(), json!(tick))).collect();
        let mut body = MessageBody::new();
        body.insert("y".into(), Value::Object(y));
        body.insert("z".into(), Value::Object(z));
        body.insert("s".into(), Value::Object(s));
        body
    }

    /// Decide what to do with task `t` given sender `v`'s view.
    fn rule(&self, v: &View, t: TaskId) -> Action {
        let i = self.id;
        let k = v.sender;
        let yk = v.y.get(&t).copied();
        let yi = self.state.winning_agents.get(&t).copied();
        let zk = v.z.get(&t).copied().unwrap_or(0.0);
        let zi = self.z(t);
        let fresher = |m: AgentId| v.s.get(&m).copied() > self.state.timestamps.get(&m).copied();
        let staler = |m: AgentId| v.s.get(&m).copied() < self.state.timestamps.get(&m).copied();
        // k's bid for its claimed winner beats ours, ties to the lower id
        let outbids = |winner: AgentId| zk > zi || (zk == zi && winner < i);
        match (yk, yi) {
            (Some(a), yi) if a == k => match yi {
                Some(b) if b == i => {
                    if outbids(k) {
                        Action::Update
                    } else {
                        Action::Leave
                    }
                }
                Some(b) if b == k => Action::Update,
                Some(m) => {
                    if fresher(m) || zk > zi || (zk == zi && k < m) {
                        Action::Update
                    } else {
                        Action::Leave
                    }
                }
                None => Action::Update,
            },
            (Some(a), yi) if a == i => match yi {
                Some(b) if b == i => Action::Leave,
                Some(b) if b == k => Action::Reset,
                Some(m) => {
                    if fresher(m) {
                        Action::Reset
                    } else {
                        Action::Leave
                    }
                }
                None => Action::Leave,
            },
            (Some(m), yi) => match yi {
                Some(b) if b == i => {
                    if fresher(m) && outbids(m) {
                        Action::Update
                    } else {
                        Action::Leave
                    }
                }
                Some(b) if b == k => {
                    if fresher(m) {
                        Action::Update
                    } else {
                        Action::Reset
                    }
                }
                Some(b) if b == m => {
                    if fresher(m) {
                        Action::Update
                    } else {
                        Action::Leave
                    }
                }
                Some(n) => {
                    if fresher(m) && (fresher(n) || zk > zi || (zk == zi && m < n)) {
                        Action::Update
                    } else if fresher(n) && staler(m) {
                        Action::Reset
                    } else {
                        Action::Leave
                    }
                }
                None => {
                    if fresher(m) {
                        Action::Update
                    } else {
                        Action::Leave
                    }
                }
            },
            (None, yi) => match yi {
                Some(b) if b == i => Action::Leave,
                Some(b) if b == k => Action::Update,
                Some(m) => {
                    if fresher(m) {
                        Action::Update
                    } else {
                        Action::Leave
                    }
                }
                None => Action::Leave,
            },
        }
    }

    /// Apply every received view, truncate the bundle at the first lost
    /// task and merge timestamps. Returns true if anything changed.
    pub fn consensus(&mut self, messages: &[MessagePayload]) -> bool {
        let before_y = self.state.winning_agents.clone();
        let before_z = self.state.winning_bids.clone();
        let mut truncated = false;
        for msg in messages {
            if msg.sender_id == self.id {
                continue;
            }
            let v = View::decode(msg);
            let mut tasks: Vec<TaskId> = v.y.keys().chain(self.state.winning_agents.keys()).copied().collect();
            tasks.sort_unstable();
            tasks.dedup();
            for t in tasks {
                if self.state.memory.is_completed(t) {
                    continue;
                }
                match self.rule(&v, t) {
                    Action::Update => match v.y.get(&t) {
                        Some(&a) => {
                            self.state.winning_agents.insert(t, a);
                            self.state.winning_bids.insert(t, v.z.get(&t).copied().unwrap_or(0.0));
                        }
                        None => self.clear_winner(t),
                    },
                    Action::Reset => self.clear_winner(t),
                    Action::Leave => {}
                }
            }
            truncated |= self.truncate();
            // a neighbor that is wrong about our own tasks needs to hear from us
            if self.state.bundle.iter().any(|t| v.y.get(t) != Some(&self.id)) {
                self.state.rebroadcast = true;
            }
            for (&m, &tick) in &v.s {
                if m != self.id {
                    let e = self.state.timestamps.entry(m).or_insert(tick);
                    *e = (*e).max(tick);
                }
            }
            let e = self.state.timestamps.entry(v.sender).or_insert(v.tick);
            *e = (*e).max(v.tick);
        }
        truncated || before_y != self.state.winning_agents || before_z != self.state.winning_bids
    }

    /// Drop the first task we no longer win and everything added after it.
    fn truncate(&mut self) -> bool {
        let Some(n) = self
            .state
            .bundle
            .iter()
            .position(|t| self.state.winning_agents.get(t) != Some(&self.id))
        else {
            return false;
        };
        let removed: Vec<TaskId> = self.state.bundle.drain(n..).collect();
        for (idx, t) in removed.iter().enumerate() {
            self.state.own_bids.remove(t);
            self.state.path.retain(|p| p != t);
            if idx > 0 && self.state.winning_agents.get(t) == Some(&self.id) {
                self.clear_winner(*t);
            }
        }
        true
    }

    /// Forget every known winning bid once the bundle has stayed empty for
    /// the starvation timeout.
    pub fn reset_on_starvation(&mut self, now: f64) {
        if !self.state.bundle.is_empty() {
            self.state.empty_bundle_since = None;
            return;
        }
        let since = *self.state.empty_bundle_since.get_or_insert(now);
        if let Some(timeout) = self.state.starvation_timeout {
            if now - since >= timeout {
                self.state.winning_agents.clear();
                self.state.winning_bids.clear();
                self.state.empty_bundle_since = Some(now);
                self.state.satisfied = false;
            }
        }
    }
}

impl TwoPhase for CbbaPolicy {
    fn satisfied(&self) -> bool {
        self.state.satisfied
    }

    fn set_satisfied(&mut self, satisfied: bool) {
        self.state.satisfied = satisfied;
    }

    fn post_process(&mut self, ctx: &mut DecisionContext<'_>) {
        let obs = self.state.memory.observe(ctx.local_tasks);
        for t in obs.newly_completed {
            if self.state.own_bids.contains_key(&t) {
                self.state.satisfied = false;
            }
            self.forget_task(t);
        }
        if !obs.new_open.is_empty() && self.state.bundle.len() < self.state.max_bundle {
            self.state.satisfied = false;
        }
        self.reset_on_starvation(ctx.time);
    }

    fn local_decision(&mut self, ctx: &mut DecisionContext<'_>) -> MessageBody {
        // absorb what neighbors said this tick before bidding on top of it
        self.consensus(ctx.messages_received);
        self.build_bundle(ctx);
        self.state.rebroadcast = false;
        self.outbox(ctx.tick)
    }

    fn conflict_mitigation(&mut self, ctx: &mut DecisionContext<'_>) -> bool {
        !self.consensus(ctx.messages_received)
    }

    fn assigned_task(&self) -> Option<TaskId> {
        self.state.path.first().copied()
    }

    fn rebroadcast(&mut self, ctx: &mut DecisionContext<'_>) -> Option<MessageBody> {
        if std::mem::take(&mut self.state.rebroadcast) {
            Some(self.outbox(ctx.tick))
        } else {
            None
        }
    }
}

impl Policy for CbbaPolicy {
    fn name(&self) -> &str {
        "cbba"
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
