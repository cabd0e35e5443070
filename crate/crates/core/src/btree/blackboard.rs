use std::collections::BTreeMap;

use serde_json::Value;

use crate::comms::TaskView;
use crate::types::{MessagePayload, TaskId, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationTarget {
    pub target: Vec2,
    /// Tick at which the exploration leg ends.
    pub expiry_tick: u64,
}

/// Per-agent scratch space shared by the action nodes of one tree.
///
/// The well-known keys are typed fields; custom action nodes can stash
/// anything else under string keys.
#[derive(Debug, Clone, Default)]
pub struct Blackboard {
    /// Rewritten by LocalSensing every tick.
    pub local_tasks: Vec<TaskView>,
    /// Rewritten by LocalSensing every tick.
    pub messages_received: Vec<MessagePayload>,
    pub assigned_task_id: Option<TaskId>,
    pub exploration_target: Option<ExplorationTarget>,
    custom: BTreeMap<String, Value>,
}

impl Blackboard {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.custom.get(key)
    }

    pub fn set(&mut self, key: impl Into<String>, value: Value) -> Option<Value> {
        self.custom.insert(key.into(), value)
    }

    pub fn remove(&mut self, key: &str) -> Option<Value> {
        self.custom.remove(key)
    }
}
