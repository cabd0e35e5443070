//! The four built-in action nodes and the per-agent context they run in.

use std::sync::Arc;

use rand::Rng;

use crate::btree::{
    ActionRegistry, Blackboard, ExplorationTarget, NodeStatus, DECISION_MAKING, EXPLORATION, LOCAL_SENSING,
    TASK_EXECUTION,
};
use crate::comms::TaskView;
use crate::config::{Area, PolicyParams};
use crate::policy::{DecisionContext, DecisionStatus, Policy};
use crate::rng::StreamRng;
use crate::types::{distance, AgentState, MessagePayload, TaskId, TaskState, Vec2};

/// Everything an agent carries between ticks apart from its kinematic
/// state and blackboard.
pub struct Brain {
    pub policy: Box<dyn Policy>,
    pub policy_rng: StreamRng,
    pub explore_rng: StreamRng,
}

/// What action nodes see and produce during one agent's tick.
pub struct TickCtx {
    /// Start-of-tick copy of the agent.
    pub agent: AgentState,
    /// Start-of-tick task list, indexed by task id.
    pub tasks: Arc<Vec<TaskState>>,
    /// Tasks inside the agent's perception range.
    pub local_tasks: Vec<TaskView>,
    pub brain: Brain,
    pub params: Arc<PolicyParams>,
    pub area: Area,
    pub tick: u64,
    pub time: f64,
    pub sim_rate: f64,
    /// Outbox written this tick.
    pub outbox: Option<MessagePayload>,
    /// Where to move this tick; `None` brakes.
    pub move_target: Option<Vec2>,
    /// Task to work on if within arrival radius after moving.
    pub working_on: Option<TaskId>,
    /// Last decision status, for tracing.
    pub decision: Option<DecisionStatus>,
}

impl TickCtx {
    fn task(&self, id: TaskId) -> Option<&TaskState> {
        usize::try_from(id)
            .ok()
            .and_then(|i| self.tasks.get(i))
            .filter(|t| t.id == id)
            .or_else(|| self.tasks.iter().find(|t| t.id == id))
    }
}

/// Registry with the four built-in nodes.
pub fn builtin_actions() -> ActionRegistry<TickCtx> {
    let mut r = ActionRegistry::new();
    r.register(LOCAL_SENSING, local_sensing).expect("fresh registry");
    r.register(DECISION_MAKING, decision_making).expect("fresh registry");
    r.register(TASK_EXECUTION, task_execution).expect("fresh registry");
    r.register(EXPLORATION, exploration).expect("fresh registry");
    r
}

/// Publish this tick's perception and inbox.
pub fn local_sensing(ctx: &mut TickCtx, bb: &mut Blackboard) -> NodeStatus {
    bb.local_tasks = std::mem::take(&mut ctx.local_tasks);
    bb.messages_received = std::mem::take(&mut ctx.agent.messages_received);
    NodeStatus::Success
}

/// Ask the policy for an assignment.
pub fn decision_making(ctx: &mut TickCtx, bb: &mut Blackboard) -> NodeStatus {
    let mut dctx = DecisionContext {
        agent: &ctx.agent,
        local_tasks: &bb.local_tasks,
        messages_received: &bb.messages_received,
        tick: ctx.tick,
        time: ctx.time,
        params: &ctx.params,
        rng: &mut ctx.brain.policy_rng,
    };
    let out = ctx.brain.policy.decide(&mut dctx);
    if let Some(body) = out.outbox {
        ctx.outbox = Some(MessagePayload::new(ctx.agent.id, ctx.tick, body));
    }
    ctx.decision = Some(out.status);
    match (out.status, out.assigned_task_id) {
        (DecisionStatus::Assigned, Some(t)) => {
            bb.assigned_task_id = Some(t);
            bb.exploration_target = None;
            NodeStatus::Success
        }
        (DecisionStatus::Deliberating, _) => NodeStatus::Running,
        _ => {
            bb.assigned_task_id = None;
            NodeStatus::Failure
        }
    }
}

/// Head for the assigned task and work on it once there.
pub fn task_execution(ctx: &mut TickCtx, bb: &mut Blackboard) -> NodeStatus {
    let Some(t) = bb.assigned_task_id else {
        return NodeStatus::Failure;
    };
    // completion is only known for perceived tasks
    if bb.local_tasks.iter().any(|v| v.task_id == t && v.completed) {
        bb.assigned_task_id = None;
        return NodeStatus::Failure;
    }
    let Some(position) = ctx.task(t).map(|task| task.position) else {
        bb.assigned_task_id = None;
        return NodeStatus::Failure;
    };
    ctx.move_target = Some(position);
    ctx.working_on = Some(t);
    NodeStatus::Running
}

/// Wander to random waypoints. A leg ends on arrival or when its timer
/// runs out, whichever comes first.
pub fn exploration(ctx: &mut TickCtx, bb: &mut Blackboard) -> NodeStatus {
    bb.assigned_task_id = None;
    let leg = match bb.exploration_target {
        Some(leg) if ctx.tick < leg.expiry_tick => leg,
        Some(_) => {
            bb.exploration_target = None;
            return NodeStatus::Success;
        }
        None => {
            let rng = &mut ctx.brain.explore_rng;
            let target = Vec2::new(
                rng.random_range(0.0..=ctx.area.width),
                rng.random_range(0.0..=ctx.area.height),
            );
            let ticks = (ctx.params.exploration_duration * ctx.sim_rate).ceil().max(1.0) as u64;
            let leg = ExplorationTarget {
                target,
                expiry_tick: ctx.tick + ticks,
            };
            bb.exploration_target = Some(leg);
            leg
        }
    };
    if distance(ctx.agent.position, leg.target) <= ctx.params.arrival_radius {
        bb.exploration_target = None;
        return NodeStatus::Success;
    }
    ctx.move_target = Some(leg.target);
    NodeStatus::Running
}
