use std::collections::{BTreeMap, BTreeSet};

use crate::comms::TaskView;
use crate::types::{TaskId, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskInfo {
    pub position: Vec2,
    pub initial_workload: f64,
    pub workload_remaining: f64,
}

/// What a policy remembers about tasks it has perceived, including tasks
/// that have since left perception range. Completed tasks become
/// tombstones and are never resurrected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskMemory {
    known: BTreeMap<TaskId, TaskInfo>,
    completed: BTreeSet<TaskId>,
}

/// Changes noticed by one [`TaskMemory::observe`] call.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Observation {
    pub new_open: Vec<TaskId>,
    pub newly_completed: Vec<TaskId>,
}

impl TaskMemory {
    pub fn observe(&mut self, views: &[TaskView]) -> Observation {
        let mut obs = Observation::default();
        for v in views {
            if v.completed {
                if self.completed.insert(v.task_id) {
                    self.known.remove(&v.task_id);
                    obs.newly_completed.push(v.task_id);
                }
                continue;
            }
            if self.completed.contains(&v.task_id) {
                continue;
            }
            let info = TaskInfo {
                position: v.position,
                initial_workload: v.initial_workload,
                workload_remaining: v.workload_remaining,
            };
            if self.known.insert(v.task_id, info).is_none() {
                obs.new_open.push(v.task_id);
            }
        }
        obs
    }

    pub fn get(&self, id: TaskId) -> Option<&TaskInfo> {
        self.known.get(&id)
    }

    pub fn is_completed(&self, id: TaskId) -> bool {
        self.completed.contains(&id)
    }

    pub fn known_ids(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.known.keys().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::test_support::task;

    #[test]
    fn tracks_new_and_completed() {
        let mut m = TaskMemory::default();
        let mut views = vec![task(1, 0.0, 0.0, 5.0), task(2, 1.0, 0.0, 5.0)];
        assert_eq!(m.observe(&views).new_open, vec![1, 2]);
        assert_eq!(m.observe(&views), Observation::default());
        views[0].completed = true;
        let obs = m.observe(&views);
        assert_eq!(obs.newly_completed, vec![1]);
        assert!(m.is_completed(1));
        assert!(m.get(1).is_none());
        // a stale open view never resurrects a tombstone
        views[0].completed = false;
        assert_eq!(m.observe(&views), Observation::default());
        assert!(m.get(2).is_some());
    }
}
