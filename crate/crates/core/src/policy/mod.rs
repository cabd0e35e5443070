//! Decision-making plugins.
//!
//! A policy is called once per tick by the `DecisionMakingNode`. It sees
//! only what the agent perceived this tick (local tasks and the messages
//! neighbors shared last tick) and answers with an assignment, a request to
//! keep deliberating, or "nothing to do here". Anything it wants neighbors
//! to see goes in the outbox.
//!
//! CBBA and GRAPE share the two-phase skeleton in [`two_phase_decide`]:
//! a local decision that broadcasts, followed on later ticks by conflict
//! mitigation against what neighbors broadcast.

pub mod cbba;
pub mod fcg;
pub mod grape;
mod memory;

use std::any::Any;
use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::Value;
use thiserror::Error;

use crate::comms::TaskView;
use crate::config::{CostScale, PolicyParams, RewardRule};
use crate::rng::StreamRng;
use crate::types::{AgentId, AgentState, MessageBody, MessagePayload, TaskId};

pub use cbba::CbbaPolicy;
pub use fcg::FcgPolicy;
pub use grape::GrapePolicy;
pub use memory::{Observation, TaskInfo, TaskMemory};

pub const BUILTIN_POLICIES: [&str; 3] = ["cbba", "grape", "fcg"];

/// Read-only inputs for one decision.
pub struct DecisionContext<'a> {
    pub agent: &'a AgentState,
    pub local_tasks: &'a [TaskView],
    pub messages_received: &'a [MessagePayload],
    pub tick: u64,
    /// Seconds since episode start.
    pub time: f64,
    pub params: &'a PolicyParams,
    /// Tie-break stream private to this agent.
    pub rng: &'a mut StreamRng,
}

impl DecisionContext<'_> {
    pub fn open_tasks(&self) -> impl Iterator<Item = &TaskView> {
        self.local_tasks.iter().filter(|t| !t.completed)
    }

    pub fn has_open_tasks(&self) -> bool {
        self.open_tasks().next().is_some()
    }

    pub fn reward(&self, initial_workload: f64) -> f64 {
        reward(self.params.reward_rule, initial_workload)
    }

    /// Distance-based cost c_ij for reaching a point `dist` away.
    pub fn cost(&self, dist: f64) -> f64 {
        match self.params.cost_scale {
            CostScale::TravelTime => dist / self.agent.max_speed,
            CostScale::Distance => dist,
        }
    }
}

pub fn reward(rule: RewardRule, initial_workload: f64) -> f64 {
    match rule {
        RewardRule::Workload => initial_workload,
        RewardRule::Unit => 1.0,
    }
}

/// A formula was evaluated outside its domain.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("domain error: {0}")]
pub struct DomainError(String);

impl DomainError {
    pub fn new(msg: impl Into<String>) -> Self {
        DomainError(msg.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionStatus {
    NoTask,
    Deliberating,
    Assigned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionOutcome {
    pub assigned_task_id: Option<TaskId>,
    pub outbox: Option<MessageBody>,
    pub status: DecisionStatus,
}

impl DecisionOutcome {
    pub fn no_task() -> Self {
        DecisionOutcome {
            assigned_task_id: None,
            outbox: None,
            status: DecisionStatus::NoTask,
        }
    }

    pub fn deliberating(outbox: Option<MessageBody>) -> Self {
        DecisionOutcome {
            assigned_task_id: None,
            outbox,
            status: DecisionStatus::Deliberating,
        }
    }

    pub fn assigned(task: TaskId) -> Self {
        DecisionOutcome {
            assigned_task_id: Some(task),
            outbox: None,
            status: DecisionStatus::Assigned,
        }
    }

    pub fn with_outbox(mut self, outbox: Option<MessageBody>) -> Self {
        self.outbox = outbox;
        self
    }
}

/// The plugin contract.
pub trait Policy: Send {
    fn name(&self) -> &str;

    /// One decision. Must only mutate the policy's own state.
    fn decide(&mut self, ctx: &mut DecisionContext<'_>) -> DecisionOutcome;

    fn as_any(&self) -> &dyn Any;

    fn as_any_mut(&mut self) -> &mut dyn Any;
}

/// Hooks for the shared local-decision / conflict-mitigation state machine.
pub trait TwoPhase {
    fn satisfied(&self) -> bool;
    fn set_satisfied(&mut self, satisfied: bool);
    /// Runs first every call: react to completed or newly seen tasks.
    fn post_process(&mut self, ctx: &mut DecisionContext<'_>);
    /// Local decision-making; returns the body to share.
    fn local_decision(&mut self, ctx: &mut DecisionContext<'_>) -> MessageBody;
    /// Conflict mitigation with `ctx.messages_received`; true if conflict-free.
    fn conflict_mitigation(&mut self, ctx: &mut DecisionContext<'_>) -> bool;
    fn assigned_task(&self) -> Option<TaskId>;
    /// Body to share even though the agent is settled, e.g. to correct a
    /// neighbor that holds stale information about our own assignments.
    fn rebroadcast(&mut self, _ctx: &mut DecisionContext<'_>) -> Option<MessageBody> {
        None
    }
}

pub fn two_phase_decide<P: TwoPhase>(p: &mut P, ctx: &mut DecisionContext<'_>) -> DecisionOutcome {
    p.post_process(ctx);
    if !ctx.has_open_tasks() {
        return DecisionOutcome::no_task();
    }
    if !p.satisfied() {
        let body = p.local_decision(ctx);
        p.set_satisfied(true);
        return DecisionOutcome::deliberating(Some(body));
    }
    if !p.conflict_mitigation(ctx) {
        p.set_satisfied(false);
        return DecisionOutcome::deliberating(None);
    }
    let outcome = match p.assigned_task() {
        Some(t) => DecisionOutcome::assigned(t),
        None => DecisionOutcome::no_task(),
    };
    outcome.with_outbox(p.rebroadcast(ctx))
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

pub type PolicyFactory = Arc<dyn Fn(AgentId, &PolicyParams) -> Box<dyn Policy> + Send + Sync>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
    #[error("policy `{0}` is already registered")]
    Duplicate(String),
}

/// Name → factory. Custom policies register here and become valid
/// `policy.name` values.
#[derive(Clone)]
pub struct PolicyRegistry {
    factories: BTreeMap<String, PolicyFactory>,
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        PolicyRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("cbba", |id, p| Box::new(CbbaPolicy::new(id, p))).unwrap();
        r.register("grape", |id, p| Box::new(GrapePolicy::new(id, p))).unwrap();
        r.register("fcg", |id, _| Box::new(FcgPolicy::new(id))).unwrap();
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F) -> Result<(), PolicyError>
    where
        F: Fn(AgentId, &PolicyParams) -> Box<dyn Policy> + Send + Sync + 'static,
    {
        if self.factories.contains_key(name) {
            return Err(PolicyError::Duplicate(name.to_string()));
        }
        self.factories.insert(name.to_string(), Arc::new(factory));
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, agent: AgentId, params: &PolicyParams) -> Result<Box<dyn Policy>, PolicyError> {
        let f = self
            .factories
            .get(&params.name)
            .ok_or_else(|| PolicyError::UnknownPolicy(params.name.clone()))?;
        Ok(f(agent, params))
    }
}

// ---------------------------------------------------------------------------
// Message body helpers
// ---------------------------------------------------------------------------

/// Iterate `body[key]` as an object whose keys are integers.
pub(crate) fn int_keyed<'a>(body: &'a MessageBody, key: &str) -> impl Iterator<Item = (u64, &'a Value)> {
    body.get(key)
        .and_then(Value::as_object)
        .into_iter()
        .flat_map(|m| m.iter())
        .filter_map(|(k, v)| k.parse::<u64>().ok().map(|k| (k, v)))
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn registry_builtins_and_custom() {
        let mut reg = PolicyRegistry::with_builtins();
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["cbba", "fcg", "grape"]);
        assert_eq!(
            reg.register("fcg", |id, _| Box::new(FcgPolicy::new(id))).unwrap_err(),
            PolicyError::Duplicate("fcg".into())
        );
        reg.register("mine", |id, _| Box::new(FcgPolicy::new(id))).unwrap();
        let params = PolicyParams {
            name: "mine".into(),
            ..PolicyParams::default()
        };
        assert!(reg.create(0, &params).is_ok());
        let bad = PolicyParams {
            name: "nope".into(),
            ..PolicyParams::default()
        };
        assert!(matches!(reg.create(0, &bad), Err(PolicyError::UnknownPolicy(_))));
    }

    #[test]
    fn every_builtin_reports_no_task_without_local_tasks() {
        let reg = PolicyRegistry::with_builtins();
        let a = agent(0, 0.0, 0.0);
        for name in BUILTIN_POLICIES {
            let params = PolicyParams {
                name: name.into(),
                ..PolicyParams::default()
            };
            let mut p = reg.create(0, &params).unwrap();
            let out = with_ctx(&a, &[], &[], 0, &params, |ctx| p.decide(ctx));
            assert_eq!(out.status, DecisionStatus::NoTask, "{name}");
            assert!(out.assigned_task_id.is_none());
        }
    }

    #[test]
    fn every_builtin_deliberates_then_assigns_when_isolated() {
        let reg = PolicyRegistry::with_builtins();
        let a = agent(0, 0.0, 0.0);
        let tasks = vec![task(1, 100.0, 0.0, 10.0), task(2, 10.0, 0.0, 10.0)];
        for name in BUILTIN_POLICIES {
            let params = PolicyParams {
                name: name.into(),
                ..PolicyParams::default()
            };
            let mut p = reg.create(0, &params).unwrap();
            let first = with_ctx(&a, &tasks, &[], 0, &params, |ctx| p.decide(ctx));
            assert_eq!(first.status, DecisionStatus::Deliberating, "{name}");
            assert!(first.outbox.as_ref().is_some_and(|b| !b.is_empty()), "{name}");
            let second = with_ctx(&a, &tasks, &[], 1, &params, |ctx| p.decide(ctx));
            assert_eq!(second.status, DecisionStatus::Assigned, "{name}");
            // nearest / best task for an isolated agent is the close one
            assert_eq!(second.assigned_task_id, Some(2), "{name}");
        }
    }
}
