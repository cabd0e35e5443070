use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::compare::{compare, write_trend_report};
use super::spec::{BatchSpec, ResolvedScenario};
use super::stats::{summarize, Summary};
use super::HarnessError;
use crate::engine::{AGENTS_FINAL_CSV, EPISODE_CSV};
use crate::engine::run_to_dir;
use crate::policy::PolicyRegistry;

pub const DONE_MARKER: &str = "DONE";
pub const FAILED_MARKER: &str = "FAILED";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_ALL_CSV: &str = "summary_all.csv";
pub const TREND_REPORT_CSV: &str = "trend_report.csv";

pub const MISSION_TIME: &str = "mission_time";
pub const DISTANCE_PER_AGENT: &str = "distance_per_agent";
pub const WORKLOAD_PER_AGENT: &str = "workload_per_agent";
pub const METRICS: [&str; 3] = [MISSION_TIME, DISTANCE_PER_AGENT, WORKLOAD_PER_AGENT];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchReport {
    pub output_dir: PathBuf,
    pub ran: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// One finished episode as read back from its directory.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub run: u32,
    pub seed: u64,
    pub policy: String,
    pub n_a: u32,
    pub r_c: f64,
    pub mission_time: f64,
    pub terminated: String,
    pub distance_per_agent: f64,
    pub workload_per_agent: f64,
}

impl EpisodeRow {
    pub fn metric(&self, name: &str) -> f64 {
        match name {
            MISSION_TIME => self.mission_time,
            DISTANCE_PER_AGENT => self.distance_per_agent,
            WORKLOAD_PER_AGENT => self.workload_per_agent,
            _ => f64::NAN,
        }
    }
}

/// One line of `summary_all.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub policy: String,
    pub n_a: u32,
    pub r_c: f64,
    pub metric: String,
    pub summary: Summary,
    pub failed: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Run every pending episode, then write all summaries.
///
/// `jobs` overrides the spec's parallelism. Runs whose directory holds a
/// `DONE` marker are skipped; a run that errors or panics gets a `FAILED`
/// marker and is retried on the next invocation.
pub fn run_batch(spec: &BatchSpec, policies: &PolicyRegistry, jobs: Option<usize>) -> Result<BatchReport, HarnessError> {
    let scenarios = spec.resolve(|n| policies.contains(n))?;
    let out = spec.output_dir();
    fs::create_dir_all(&out).map_err(io_err(&out))?;

    let mut pending = Vec::new();
    let mut skipped = 0;
    for s in &scenarios {
        for run in 0..s.num_runs {
            let dir = out.join(&s.name).join(run.to_string());
            if dir.join(DONE_MARKER).exists() {
                skipped += 1;
            } else {
                pending.push((s, run, dir));
            }
        }
    }

    let threads = jobs
        .or(spec.parallelism)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Spec(e.to_string()))?;
    let outcomes: Vec<bool> = pool.install(|| {
        pending
            .par_iter()
            .map(|(s, run, dir)| run_one(s, spec.base_seed, *run, dir, policies))
            .collect()
    });
    let failed = outcomes.iter().filter(|ok| !**ok).count();

    write_summaries(&out, &scenarios.iter().map(|s| s.name.clone()).collect::<Vec<_>>())?;
    Ok(BatchReport {
        output_dir: out,
        ran: pending.len(),
        skipped,
        failed,
    })
}

/// Ok(false) when the episode failed; errors only if even the marker
/// cannot be written.
fn run_one(s: &ResolvedScenario, base_seed: u64, run: u32, dir: &Path, policies: &PolicyRegistry) -> bool {
    let mut cfg = s.config.clone();
    cfg.seed = s.seed(base_seed, run);
    let failed = dir.join(FAILED_MARKER);
    if failed.exists() {
        let _ = fs::remove_file(&failed);
    }
    let outcome = catch_unwind(AssertUnwindSafe(|| run_to_dir(&cfg, policies, None, dir)));
    let (marker, text, ok) = match outcome {
        Ok(Ok(r)) => (DONE_MARKER, format!("{}\n", r.terminated.as_str()), true),
        Ok(Err(e)) => (FAILED_MARKER, format!("{e}\n"), false),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            (FAILED_MARKER, format!("panic: {msg}\n"), false)
        }
    };
    if fs::write(dir.join(marker), &text).is_err() && ok {
        // without its marker the run would be redone anyway
        return false;
    }
    if !ok {
        eprintln!("{}/{run}: {}", s.name, text.trim_end());
    }
    ok
}

fn read_csv(path: &Path) -> Result<(csv::StringRecord, Vec<csv::StringRecord>), HarnessError> {
    let bad = |e: csv::Error| HarnessError::BadEpisode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(bad)?;
    let headers = r.headers().map_err(bad)?.clone();
    let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(bad)?;
    Ok((headers, rows))
}

fn field<T: std::str::FromStr>(path: &Path, headers: &csv::StringRecord, row: &csv::StringRecord, name: &str) -> Result<T, HarnessError> {
    headers
        .iter()
        .position(|h| h == name)
        .and_then(|i| row.get(i))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| HarnessError::BadEpisode {
            path: path.to_path_buf(),
            reason: format!("missing or malformed `{name}`"),
        })
}

/// Read one finished run directory.
pub fn read_episode(dir: &Path, run: u32) -> Result<EpisodeRow, HarnessError> {
    let path = dir.join(EPISODE_CSV);
    let (h, rows) = read_csv(&path)?;
    let row = rows.first().ok_or_else(|| HarnessError::BadEpisode {
        path: path.clone(),
        reason: "no data row".into(),
    })?;
    let n_a: u32 = field(&path, &h, row, "n_a")?;

    let apath = dir.join(AGENTS_FINAL_CSV);
    let (ah, arows) = read_csv(&apath)?;
    let (mut dist, mut work) = (0.0, 0.0);
    for r in &arows {
        dist += field::<f64>(&apath, &ah, r, "distance_traveled")?;
        work += field::<f64>(&apath, &ah, r, "workload_done")?;
    }
    let per = n_a.max(1) as f64;
    Ok(EpisodeRow {
        run,
        seed: field(&path, &h, row, "seed")?,
        policy: field(&path, &h, row, "policy")?,
        n_a,
        r_c: field(&path, &h, row, "r_c")?,
        mission_time: field(&path, &h, row, "mission_time")?,
        terminated: field(&path, &h, row, "terminated")?,
        distance_per_agent: dist / per,
        workload_per_agent: work / per,
    })
}

/// Finished runs of one scenario, in run order, and the number of failed runs.
pub fn collect_scenario(dir: &Path) -> Result<(Vec<EpisodeRow>, usize), HarnessError> {
    let mut runs: Vec<(u32, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let Some(run) = entry.file_name().to_str().and_then(|s| s.parse::<u32>().ok()) else {
            continue;
        };
        if entry.path().is_dir() {
            runs.push((run, entry.path()));
        }
    }
    runs.sort();
    let mut rows = Vec::new();
    let mut failed = 0;
    for (run, path) in runs {
        if path.join(DONE_MARKER).exists() {
            rows.push(read_episode(&path, run)?);
        } else if path.join(FAILED_MARKER).exists() {
            failed += 1;
        }
    }
    Ok((rows, failed))
}

fn num(x: f64) -> String {
    x.to_string()
}

fn summary_fields(s: &Summary) -> [String; 8] {
    [
        s.n.to_string(),
        num(s.min),
        num(s.q1),
        num(s.median),
        num(s.q3),
        num(s.max),
        num(s.mean),
        num(s.stddev),
    ]
}

/// Summary rows for one scenario; empty if no run finished.
pub fn summarize_scenario(name: &str, rows: &[EpisodeRow], failed: usize) -> Result<Vec<SummaryRow>, HarnessError> {
    let Some(first) = rows.first() else {
        return Ok(Vec::new());
    };
    METRICS
        .iter()
        .map(|m| {
            let values: Vec<f64> = rows.iter().map(|r| r.metric(m)).collect();
            Ok(SummaryRow {
                scenario: name.to_string(),
                policy: first.policy.clone(),
                n_a: first.n_a,
                r_c: first.r_c,
                metric: m.to_string(),
                summary: summarize(&values)?,
                failed,
            })
        })
        .collect()
}

/// Write `<out>/<scenario>/summary.csv` for each scenario, then
/// `summary_all.csv` and, when the batch has enough range levels,
/// `trend_report.csv`.
pub fn write_summaries(out: &Path, scenarios: &[String]) -> Result<Vec<SummaryRow>, HarnessError> {
    let csv_err = |path: &Path| {
        let path = path.to_path_buf();
        move |e: csv::Error| HarnessError::Io {
            path,
            source: std::io::Error::other(e),
        }
    };
    let mut all = Vec::new();
    for name in scenarios {
        let dir = out.join(name);
        if !dir.is_dir() {
            continue;
        }
        let (rows, failed) = collect_scenario(&dir)?;
        let summary = summarize_scenario(name, &rows, failed)?;
        let path = dir.join(SUMMARY_CSV);
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["scenario", "metric", "n", "min", "q1", "median", "q3", "max", "mean", "stddev"])
            .map_err(csv_err(&path))?;
        for r in &summary {
            let mut rec = vec![r.scenario.clone(), r.metric.clone()];
            rec.extend(summary_fields(&r.summary));
            w.write_record(&rec).map_err(csv_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
        all.extend(summary);
    }

    let path = out.join(SUMMARY_ALL_CSV);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record([
        "scenario", "policy", "n_a", "r_c", "metric", "n", "min", "q1", "median", "q3", "max", "mean", "stddev", "failed",
    ])
    .map_err(csv_err(&path))?;
    for r in &all {
        let mut rec = vec![r.scenario.clone(), r.policy.clone(), r.n_a.to_string(), num(r.r_c), r.metric.clone()];
        rec.extend(summary_fields(&r.summary));
        rec.push(r.failed.to_string());
        w.write_record(&rec).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let trend = out.join(TREND_REPORT_CSV);
    match compare(&all) {
        Ok(report) => write_trend_report(&trend, &report)?,
        Err(HarnessError::InsufficientScenarios) => {
            if trend.exists() {
                fs::remove_file(&trend).map_err(io_err(&trend))?;
            }
        }
        Err(e) => return Err(e),
    }
    Ok(all)
}

/// Scenario directories under a batch output directory, sorted by name.
pub fn scenario_dirs(out: &Path) -> Result<Vec<String>, HarnessError> {
    let mut names = Vec::new();
    for entry in fs::read_dir(out).map_err(io_err(out))? {
        let entry = entry.map_err(io_err(out))?;
        if entry.path().is_dir() {
            if let Some(n) = entry.file_name().to_str() {
                names.push(n.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Recompute every summary of an existing batch output directory.
pub fn summarize_dir(out: &Path) -> Result<Vec<SummaryRow>, HarnessError> {
    write_summaries(out, &scenario_dirs(out)?)
}
