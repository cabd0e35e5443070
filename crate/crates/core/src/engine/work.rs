use crate::types::{distance, AgentState, TaskId, TaskState};

/// Let every agent that intends to work on a task and is within
/// `arrival_radius` of it contribute `work_rate * dt`. Contributions to one
/// task are summed; on the final tick each contributor is credited its
/// share of what was actually consumed.
///
/// `working_on[i]` is agent `i`'s intent for this tick. Task ids index
/// `tasks` directly.
pub fn apply_work(
    agents: &mut [AgentState],
    working_on: &[Option<TaskId>],
    tasks: &mut [TaskState],
    arrival_radius: f64,
    dt: f64,
) {
    // (task index, agent indices), grouped in first-seen order
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, w) in working_on.iter().enumerate() {
        let Some(t) = *w else { continue };
        let Some(ti) = tasks.iter().position(|task| task.id == t) else { continue };
        let task = &tasks[ti];
        if task.completed || distance(agents[i].position, task.position) > arrival_radius {
            continue;
        }
        match groups.iter_mut().find(|(g, _)| *g == ti) {
            Some((_, members)) => members.push(i),
            None => groups.push((ti, vec![i])),
        }
    }
    for (ti, members) in groups {
        let offered: f64 = members.iter().map(|&i| agents[i].work_rate * dt).sum();
        let consumed = tasks[ti].reduce_amount(offered);
        for &i in &members {
            agents[i].workload_done += consumed * (agents[i].work_rate * dt / offered);
        }
    }
}
