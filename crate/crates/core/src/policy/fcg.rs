//! First-claimed greedy: take the nearest task nobody has claimed yet.
//!
//! Claims carry the tick they were made at. When two agents claim the same
//! task the earlier claim wins, ties to the lower agent id; the loser
//! abandons the task and picks again on its next decision.

use std::any::Any;
use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::{int_keyed, DecisionContext, DecisionOutcome, Policy, TaskMemory};
use crate::types::{distance, AgentId, MessageBody, TaskId};

/// Who holds a task and since when.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Claim {
    pub tick: u64,
    pub agent: AgentId,
}

#[derive(Debug, Clone, Default)]
pub struct FcgState {
    pub claimed: Option<TaskId>,
    pub known_claims: BTreeMap<TaskId, Claim>,
    pub memory: TaskMemory,
}

pub struct FcgPolicy {
    id: AgentId,
    pub state: FcgState,
}

impl FcgPolicy {
    pub fn new(id: AgentId) -> Self {
        FcgPolicy {
            id,
            state: FcgState::default(),
        }
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    /// Keep the earliest claim per task.
    pub fn merge(&mut self, task: TaskId, claim: Claim) {
        if self.state.memory.is_completed(task) {
            return;
        }
        let e = self.state.known_claims.entry(task).or_insert(claim);
        if claim < *e {
            *e = claim;
        }
    }

    fn outbox(&self, task: TaskId) -> MessageBody {
        let c = self.state.known_claims[&task];
        let mut claims = serde_json::Map::new();
        claims.insert(task.to_string(), json!([c.agent, c.tick]));
        let mut body = MessageBody::new();
        body.insert("claims".into(), Value::Object(claims));
        body
    }
}

impl Policy for FcgPolicy {
    fn name(&self) -> &str {
        "fcg"
    }

    fn decide(&mut self, ctx: &mut DecisionContext<'_>) -> DecisionOutcome {
        let obs = self.state.memory.observe(ctx.local_tasks);
        for t in &obs.newly_completed {
            self.state.known_claims.remove(t);
        }
        for msg in ctx.messages_received {
            for (task, v) in int_keyed(&msg.body, "claims") {
                let Some(arr) = v.as_array() else { continue };
                if let (Some(agent), Some(tick)) = (arr.first().and_then(Value::as_u64), arr.get(1).and_then(Value::as_u64)) {
                    self.merge(
                        task,
                        Claim {
                            tick,
                            agent: agent as AgentId,
                        },
                    );
                }
            }
        }

        if let Some(t) = self.state.claimed {
            let mine = self.state.known_claims.get(&t).is_some_and(|c| c.agent == self.id);
            if !mine || self.state.memory.is_completed(t) {
                self.state.claimed = None;
                return DecisionOutcome::deliberating(None);
            }
            return DecisionOutcome::assigned(t).with_outbox(Some(self.outbox(t)));
        }

        let me = ctx.agent.position;
        let nearest = ctx
            .open_tasks()
            .filter(|v| !self.state.known_claims.contains_key(&v.task_id))
            .min_by(|a, b| {
                distance(me, a.position)
                    .total_cmp(&distance(me, b.position))
                    .then(a.task_id.cmp(&b.task_id))
            })
            .map(|v| v.task_id);
        match nearest {
            Some(t) => {
                self.state.claimed = Some(t);
                self.state.known_claims.insert(
                    t,
                    Claim {
                        tick: ctx.tick,
                        agent: self.id,
                    },
                );
                DecisionOutcome::deliberating(Some(self.outbox(t)))
            }
            None => DecisionOutcome::no_task(),
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PolicyParams;
    use crate::policy::test_support::*;
    use crate::policy::DecisionStatus;
    use crate::types::MessagePayload;

    fn claim_msg(sender: AgentId, task: TaskId, tick: u64) -> MessagePayload {
        let mut body = MessageBody::new();
        body.insert("claims".into(), json!({ task.to_string(): [sender, tick] }));
        MessagePayload::new(sender, tick, body)
    }

    fn run(p: &mut FcgPolicy, id: AgentId, tasks: &[crate::comms::TaskView], msgs: &[MessagePayload], tick: u64) -> DecisionOutcome {
        let a = agent(id, 0.0, 0.0);
        let params = PolicyParams {
            name: "fcg".into(),
            ..PolicyParams::default()
        };
        with_ctx(&a, tasks, msgs, tick, &params, |ctx| p.decide(ctx))
    }

    #[test]
    fn claims_nearest_then_assigned() {
        let tasks = vec![task(1, 50.0, 0.0, 5.0), task(2, 5.0, 0.0, 5.0)];
        let mut p = FcgPolicy::new(0);
        let out = run(&mut p, 0, &tasks, &[], 3);
        assert_eq!(out.status, DecisionStatus::Deliberating);
        assert_eq!(out.outbox.unwrap()["claims"], json!({"2": [0, 3]}));
        let out = run(&mut p, 0, &tasks, &[], 4);
        assert_eq!(out.assigned_task_id, Some(2));
        assert!(out.outbox.is_some());
    }

    #[test]
    fn earlier_claim_wins() {
        let tasks = vec![task(1, 5.0, 0.0, 5.0)];
        let mut late = FcgPolicy::new(1);
        run(&mut late, 1, &tasks, &[], 7);
        let out = run(&mut late, 1, &tasks, &[claim_msg(0, 1, 5)], 8);
        assert_eq!(out.status, DecisionStatus::Deliberating);
        assert_eq!(late.state.claimed, None);
        // only task is taken: nothing left
        let out = run(&mut late, 1, &tasks, &[], 9);
        assert_eq!(out.status, DecisionStatus::NoTask);

        let mut early = FcgPolicy::new(0);
        run(&mut early, 0, &tasks, &[], 5);
        let out = run(&mut early, 0, &tasks, &[claim_msg(1, 1, 7)], 8);
        assert_eq!(out.assigned_task_id, Some(1));
    }

    #[test]
    fn same_tick_goes_to_lower_id() {
        let tasks = vec![task(1, 5.0, 0.0, 5.0)];
        let mut two = FcgPolicy::new(2);
        let mut nine = FcgPolicy::new(9);
        run(&mut two, 2, &tasks, &[], 4);
        run(&mut nine, 9, &tasks, &[], 4);
        assert_eq!(run(&mut two, 2, &tasks, &[claim_msg(9, 1, 4)], 5).assigned_task_id, Some(1));
        assert_eq!(run(&mut nine, 9, &tasks, &[claim_msg(2, 1, 4)], 5).status, DecisionStatus::Deliberating);
    }

    #[test]
    fn skips_claimed_tasks_and_drops_completed() {
        let mut tasks = vec![task(1, 5.0, 0.0, 5.0), task(2, 50.0, 0.0, 5.0)];
        let mut p = FcgPolicy::new(0);
        let out = run(&mut p, 0, &tasks, &[claim_msg(3, 1, 0)], 1);
        assert_eq!(p.state.claimed, Some(2));
        assert_eq!(out.status, DecisionStatus::Deliberating);
        tasks[1].completed = true;
        let out = run(&mut p, 0, &tasks, &[], 2);
        assert_eq!(out.status, DecisionStatus::Deliberating);
        assert!(!p.state.known_claims.contains_key(&2));
        assert_eq!(run(&mut p, 0, &tasks, &[], 3).status, DecisionStatus::NoTask);
    }
}
