use std::f64::consts::PI;

use crate::types::{AgentState, Vec2};

/// Advance one point-mass agent by `dt` toward `target`, or brake when
/// there is none.
///
/// The desired speed is `v_max`, reduced near the target to the speed from
/// which the agent can still stop in time (`sqrt(2 a_max d)`), so agents
/// settle on a target instead of orbiting it. The velocity change per tick
/// is capped at `a_max dt`, and an agent that would pass the target lands
/// exactly on it.
pub fn integrate_motion(agent: &mut AgentState, target: Option<Vec2>, dt: f64) {
    let to_target = target.map(|t| (t, t - agent.position));
    let desired = match to_target {
        Some((_, d)) => {
            let dist = d.norm();
            if dist == 0.0 {
                Vec2::ZERO
            } else {
                let speed = agent.max_speed.min((2.0 * agent.max_accel * dist).sqrt());
                d.normalized() * speed
            }
        }
        None => Vec2::ZERO,
    };
    let dv = (desired - agent.velocity).clamp_norm(agent.max_accel * dt);
    agent.velocity = (agent.velocity + dv).clamp_norm(agent.max_speed);

    let step = agent.velocity * dt;
    let moved = match to_target {
        Some((t, d)) if step.norm() >= d.norm() => {
            agent.position = t;
            d.norm()
        }
        _ => {
            agent.position = agent.position + step;
            step.norm()
        }
    };
    agent.distance_traveled += moved;

    if agent.velocity.norm() > 0.0 {
        let heading = agent.velocity.y.atan2(agent.velocity.x);
        let turn = wrap_angle(heading - agent.rotation);
        let cap = agent.max_angular_speed * dt;
        agent.rotation = wrap_angle(agent.rotation + turn.clamp(-cap, cap));
    }
}

/// Map an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}
