use std::io;
use std::path::Path;

use super::EpisodeResult;

pub const TIMESERIES_CSV: &str = "timeseries.csv";
pub const AGENTS_FINAL_CSV: &str = "agents_final.csv";
pub const EPISODE_CSV: &str = "episode.csv";
pub const TRACE_JSONL: &str = "trace.jsonl";

// Display on f64 prints the shortest string that parses back to the same value.
fn num(x: f64) -> String {
    x.to_string()
}

/// Write `timeseries.csv`, `agents_final.csv` and `episode.csv` into `dir`.
pub fn write_episode(dir: &Path, r: &EpisodeResult) -> io::Result<()> {
    let mut w = csv::Writer::from_path(dir.join(TIMESERIES_CSV))?;
    w.write_record([
        "time",
        "tasks_remaining",
        "workload_remaining",
        "agents_distance_sum",
        "agents_workload_sum",
    ])?;
    for row in &r.timeseries {
        w.write_record([
            num(row.time),
            row.tasks_remaining.to_string(),
            num(row.workload_remaining),
            num(row.agents_distance_sum),
            num(row.agents_workload_sum),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(AGENTS_FINAL_CSV))?;
    w.write_record(["agent_id", "distance_traveled", "workload_done"])?;
    for a in &r.agents {
        w.write_record([a.agent_id.to_string(), num(a.distance_traveled), num(a.workload_done)])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(EPISODE_CSV))?;
    w.write_record(["seed", "policy", "n_a", "r_c", "mission_time", "terminated"])?;
    w.write_record([
        r.seed.to_string(),
        r.policy.clone(),
        r.n_agents.to_string(),
        num(r.comm_range),
        num(r.mission_time),
        r.terminated.to_string(),
    ])?;
    w.flush()
}
