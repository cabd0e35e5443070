//! Radius-limited perception and one-tick-latency message exchange.

use serde::{Deserialize, Serialize};

use crate::types::{distance, AgentId, AgentState, MessagePayload, TaskId, TaskState, Vec2};

/// What an agent knows about one task it can currently perceive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub task_id: TaskId,
    pub position: Vec2,
    pub workload_remaining: f64,
    /// Workload at spawn; used as the task reward.
    pub initial_workload: f64,
    pub completed: bool,
}

impl From<&TaskState> for TaskView {
    fn from(t: &TaskState) -> Self {
        TaskView {
            task_id: t.id,
            position: t.position,
            workload_remaining: t.workload,
            initial_workload: t.initial_workload,
            completed: t.completed,
        }
    }
}

/// Adjacency lists indexed by position in the agent slice.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NeighborGraph {
    ids: Vec<AgentId>,
    adjacency: Vec<Vec<usize>>,
}

impl NeighborGraph {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Slice indices of the neighbors of the agent at `index`.
    pub fn neighbors_of(&self, index: usize) -> &[usize] {
        &self.adjacency[index]
    }

    /// Agent ids adjacent to the agent at `index`, ascending.
    pub fn neighbor_ids(&self, index: usize) -> Vec<AgentId> {
        let mut ids: Vec<AgentId> = self.adjacency[index].iter().map(|&j| self.ids[j]).collect();
        ids.sort_unstable();
        ids
    }
}

/// `j` is a neighbor of `i` iff `i != j` and their distance is at most
/// `i`'s communication range.
pub fn build_neighbor_graph(agents: &[AgentState]) -> NeighborGraph {
    let adjacency = agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut adj: Vec<usize> = agents
                .iter()
                .enumerate()
                .filter(|&(j, b)| j != i && distance(a.position, b.position) <= a.comm_range)
                .map(|(j, _)| j)
                .collect();
            adj.sort_by_key(|&j| agents[j].id);
            adj
        })
        .collect();
    NeighborGraph {
        ids: agents.iter().map(|a| a.id).collect(),
        adjacency,
    }
}

/// Every task (completed or not) within the agent's perception range,
/// sorted by task id.
pub fn snapshot_local_tasks(agent: &AgentState, tasks: &[TaskState]) -> Vec<TaskView> {
    let mut views: Vec<TaskView> = tasks
        .iter()
        .filter(|t| distance(agent.position, t.position) <= agent.sa_range)
        .map(TaskView::from)
        .collect();
    views.sort_by_key(|v| v.task_id);
    views
}

/// Deliver each agent's previous-tick outbox to its current neighbors, then
/// clear every outbox. Messages arrive ordered by sender id; an empty outbox
/// delivers nothing.
pub fn exchange_messages(agents: &mut [AgentState], graph: &NeighborGraph) {
    let outboxes: Vec<Option<MessagePayload>> =
        agents.iter_mut().map(|a| a.message_to_share.take()).collect();
    for (i, agent) in agents.iter_mut().enumerate() {
        // adjacency is already in sender-id order
        agent.messages_received = graph
            .neighbors_of(i)
            .iter()
            .filter_map(|&j| outboxes[j].clone())
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::MessageBody;

    pub(crate) fn agent_at(id: AgentId, x: f64, y: f64, rc: f64, rp: f64) -> AgentState {
        AgentState {
            id,
            position: Vec2::new(x, y),
            velocity: Vec2::ZERO,
            rotation: 0.0,
            max_speed: 1.0,
            max_accel: 1.0,
            max_angular_speed: 1.0,
            work_rate: 1.0,
            comm_range: rc,
            sa_range: rp,
            message_to_share: None,
            messages_received: Vec::new(),
            assigned_task: None,
            distance_traveled: 0.0,
            workload_done: 0.0,
        }
    }

    fn payload(sender: AgentId, tick: u64) -> MessagePayload {
        let mut body = MessageBody::new();
        body.insert("from".into(), sender.into());
        MessagePayload::new(sender, tick, body)
    }

    #[test]
    fn chain_of_three() {
        let agents = vec![
            agent_at(0, 0.0, 0.0, 100.0, 1.0),
            agent_at(1, 50.0, 0.0, 100.0, 1.0),
            agent_at(2, 150.0, 0.0, 100.0, 1.0),
        ];
        let g = build_neighbor_graph(&agents);
        assert_eq!(g.neighbor_ids(0), vec![1]);
        assert_eq!(g.neighbor_ids(1), vec![0, 2]);
        assert_eq!(g.neighbor_ids(2), vec![1]);
    }

    #[test]
    fn single_agent_has_no_neighbors() {
        let g = build_neighbor_graph(&[agent_at(0, 0.0, 0.0, 100.0, 1.0)]);
        assert!(g.neighbors_of(0).is_empty());
    }

    #[test]
    fn boundary_is_inclusive() {
        let agents = vec![agent_at(0, 0.0, 0.0, 100.0, 1.0), agent_at(1, 100.0, 0.0, 100.0, 1.0)];
        let g = build_neighbor_graph(&agents);
        assert_eq!(g.neighbor_ids(0), vec![1]);
        assert_eq!(g.neighbor_ids(1), vec![0]);
    }

    #[test]
    fn perception_range() {
        let a = agent_at(0, 0.0, 0.0, 1.0, 300.0);
        let mut done = TaskState::new(1, Vec2::new(100.0, 0.0), 5.0, 0.0);
        done.set_done();
        let tasks = vec![
            TaskState::new(3, Vec2::new(301.0, 0.0), 5.0, 0.0),
            done,
            TaskState::new(2, Vec2::new(0.0, 300.0), 5.0, 0.0),
        ];
        let views = snapshot_local_tasks(&a, &tasks);
        let ids: Vec<TaskId> = views.iter().map(|v| v.task_id).collect();
        assert_eq!(ids, vec![1, 2]);
        assert!(views[0].completed);
        assert!(snapshot_local_tasks(&a, &tasks[..1]).is_empty());
    }

    #[test]
    fn one_tick_delivery_in_sender_order() {
        let mut agents = vec![
            agent_at(0, 0.0, 0.0, 100.0, 1.0),
            agent_at(1, 10.0, 0.0, 100.0, 1.0),
            agent_at(2, 20.0, 0.0, 100.0, 1.0),
            agent_at(3, 900.0, 0.0, 100.0, 1.0),
        ];
        for a in agents.iter_mut() {
            a.message_to_share = Some(payload(a.id, 5));
        }
        let g = build_neighbor_graph(&agents);
        exchange_messages(&mut agents, &g);
        let senders = |a: &AgentState| a.messages_received.iter().map(|m| m.sender_id).collect::<Vec<_>>();
        assert_eq!(senders(&agents[0]), vec![1, 2]);
        assert_eq!(senders(&agents[1]), vec![0, 2]);
        assert_eq!(senders(&agents[2]), vec![0, 1]);
        assert!(agents[3].messages_received.is_empty());
        assert!(agents.iter().all(|a| a.message_to_share.is_none()));

        // nothing queued: the next exchange delivers nothing
        exchange_messages(&mut agents, &g);
        assert!(agents.iter().all(|a| a.messages_received.is_empty()));
    }
}
