//! Plain value types shared by every layer of the simulator.

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub type AgentId = u32;
pub type TaskId = u64;

/// Planar vector in map units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector in the same direction, or zero for the zero vector.
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Vec2::ZERO
        }
    }

    /// Same direction, magnitude capped at `max`.
    pub fn clamp_norm(self, max: f64) -> Vec2 {
        let n = self.norm();
        if n > max && n > 0.0 {
            self * (max / n)
        } else {
            self
        }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Euclidean distance between two points.
pub fn distance(a: Vec2, b: Vec2) -> f64 {
    (a - b).norm()
}

/// Schema-free message body. Policies choose their own keys.
pub type MessageBody = serde_json::Map<String, serde_json::Value>;

/// A message one agent shares with its neighbors.
///
/// The body sits behind an `Arc` so delivering one broadcast to many
/// receivers does not copy it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessagePayload {
    pub sender_id: AgentId,
    pub tick: u64,
    pub body: Arc<MessageBody>,
}

impl MessagePayload {
    pub fn new(sender_id: AgentId, tick: u64, body: MessageBody) -> Self {
        MessagePayload {
            sender_id,
            tick,
            body: Arc::new(body),
        }
    }
}

/// Kinematic and bookkeeping state of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: AgentId,
    pub position: Vec2,
    pub velocity: Vec2,
    /// Heading in radians.
    pub rotation: f64,
    pub max_speed: f64,
    pub max_accel: f64,
    pub max_angular_speed: f64,
    pub work_rate: f64,
    pub comm_range: f64,
    pub sa_range: f64,
    /// Outbox written during this tick, delivered to neighbors next tick.
    pub message_to_share: Option<MessagePayload>,
    pub messages_received: Vec<MessagePayload>,
    pub assigned_task: Option<TaskId>,
    pub distance_traveled: f64,
    pub workload_done: f64,
}

impl AgentState {
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

/// A spatially located unit of work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskState {
    pub id: TaskId,
    pub position: Vec2,
    pub workload: f64,
    /// Workload at spawn time, kept for conservation checks.
    pub initial_workload: f64,
    pub completed: bool,
    pub spawn_time: f64,
}

impl TaskState {
    pub fn new(id: TaskId, position: Vec2, workload: f64, spawn_time: f64) -> Self {
        let workload = workload.max(0.0);
        TaskState {
            id,
            position,
            workload,
            initial_workload: workload,
            completed: workload == 0.0,
            spawn_time,
        }
    }

    /// Reduce the remaining workload by up to `amount`. Returns the amount
    /// actually consumed. Marks the task done when nothing remains.
    pub fn reduce_amount(&mut self, amount: f64) -> f64 {
        if self.completed || amount <= 0.0 {
            return 0.0;
        }
        let consumed = amount.min(self.workload);
        self.workload -= consumed;
        if self.workload <= 0.0 {
            self.set_done();
        }
        consumed
    }

    pub fn set_done(&mut self) {
        self.workload = 0.0;
        self.completed = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        assert_eq!(distance(Vec2::new(0.0, 0.0), Vec2::new(3.0, 4.0)), 5.0);
        assert_eq!(distance(Vec2::new(7.0, 7.0), Vec2::new(7.0, 7.0)), 0.0);
        // sqrt(1400^2 + 1000^2) = sqrt(2_960_000) = 200 * sqrt(74)
        let diag = distance(Vec2::ZERO, Vec2::new(1400.0, 1000.0));
        assert!((diag - 200.0 * 74f64.sqrt()).abs() < 1e-9);
        assert!((diag - 1_720.465_053_408_525).abs() < 1e-9);
    }

    #[test]
    fn reduce_amount_floors_at_zero() {
        let mut t = TaskState::new(0, Vec2::ZERO, 0.4, 0.0);
        assert_eq!(t.reduce_amount(1.0), 0.4);
        assert!(t.completed);
        assert_eq!(t.workload, 0.0);
        assert_eq!(t.reduce_amount(1.0), 0.0);
    }

    #[test]
    fn clamp_norm_keeps_direction() {
        let v = Vec2::new(3.0, 4.0).clamp_norm(1.0);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((v.x - 0.6).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn distance_is_symmetric_and_non_negative(
            ax in -1e4f64..1e4, ay in -1e4f64..1e4, bx in -1e4f64..1e4, by in -1e4f64..1e4
        ) {
            let a = Vec2::new(ax, ay);
            let b = Vec2::new(bx, by);
            proptest::prop_assert!(distance(a, b) >= 0.0);
            proptest::prop_assert_eq!(distance(a, b), distance(b, a));
        }
    }
}
