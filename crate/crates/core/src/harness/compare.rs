use std::collections::BTreeMap;
use std::path::Path;

use super::batch::{SummaryRow, DISTANCE_PER_AGENT, MISSION_TIME, WORKLOAD_PER_AGENT};
use super::HarnessError;

pub const WORKLOAD_SPREAD: &str = "workload_spread";

/// One line of `trend_report.csv`.
///
/// For trend rows `direction` is `decrease`, `increase` or `flat`. For
/// the per-n_a workload spread row (policy `*`) the medians hold the
/// smallest and largest mean workload per agent and `direction` holds the
/// relative spread `(max - min) / mean`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub policy: String,
    pub n_a: u32,
    pub metric: String,
    pub rc_low: f64,
    pub rc_high: f64,
    pub median_low: f64,
    pub median_high: f64,
    pub direction: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    pub rows: Vec<TrendRow>,
    /// Runs excluded because they failed.
    pub failed_runs: usize,
}

impl TrendReport {
    pub fn find(&self, policy: &str, n_a: u32, metric: &str, rc_low: f64, rc_high: f64) -> Option<&TrendRow> {
        self.rows
            .iter()
            .find(|r| r.policy == policy && r.n_a == n_a && r.metric == metric && r.rc_low == rc_low && r.rc_high == rc_high)
    }

    pub fn workload_spread(&self, n_a: u32) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == WORKLOAD_SPREAD && r.n_a == n_a)
            .and_then(|r| r.direction.parse().ok())
    }
}

fn direction(low: f64, high: f64) -> &'static str {
    if high < low {
        "decrease"
    } else if high > low {
        "increase"
    } else {
        "flat"
    }
}

/// r_c (as bits) -> metric -> median
type Levels<'a> = BTreeMap<u64, BTreeMap<&'a str, f64>>;

/// Trends across ascending communication range for every (policy, n_a):
/// each consecutive pair of levels, plus lowest against highest when there
/// are more than two.
pub fn compare(rows: &[SummaryRow]) -> Result<TrendReport, HarnessError> {
    let mut groups: BTreeMap<(String, u32), Levels> = BTreeMap::new();
    let mut failed_runs = 0;
    let mut seen = std::collections::BTreeSet::new();
    for r in rows {
        if seen.insert(r.scenario.as_str()) {
            failed_runs += r.failed;
        }
        groups
            .entry((r.policy.clone(), r.n_a))
            .or_default()
            .entry(r.r_c.to_bits())
            .or_default()
            .insert(r.metric.as_str(), r.summary.median);
    }
    if groups.is_empty() || groups.values().any(|g| g.len() < 2) {
        return Err(HarnessError::InsufficientScenarios);
    }

    let mut out = Vec::new();
    for ((policy, n_a), levels) in &groups {
        let mut levels: Vec<(f64, &BTreeMap<&str, f64>)> = levels.iter().map(|(k, v)| (f64::from_bits(*k), v)).collect();
        levels.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut pairs: Vec<(usize, usize)> = (1..levels.len()).map(|i| (i - 1, i)).collect();
        if levels.len() > 2 {
            pairs.push((0, levels.len() - 1));
        }
        for metric in [DISTANCE_PER_AGENT, MISSION_TIME] {
            for &(a, b) in &pairs {
                let (Some(&lo), Some(&hi)) = (levels[a].1.get(metric), levels[b].1.get(metric)) else {
                    continue;
                };
                out.push(TrendRow {
                    policy: policy.clone(),
                    n_a: *n_a,
                    metric: metric.into(),
                    rc_low: levels[a].0,
                    rc_high: levels[b].0,
                    median_low: lo,
                    median_high: hi,
                    direction: direction(lo, hi).into(),
                });
            }
        }
    }

    // mean workload per agent across every scenario at the same n_a
    let mut by_n: BTreeMap<u32, (Vec<f64>, f64, f64)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == WORKLOAD_PER_AGENT) {
        let e = by_n.entry(r.n_a).or_insert((Vec::new(), f64::INFINITY, f64::NEG_INFINITY));
        e.0.push(r.summary.mean);
        e.1 = e.1.min(r.r_c);
        e.2 = e.2.max(r.r_c);
    }
    for (n_a, (means, rc_lo, rc_hi)) in by_n {
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let avg = means.iter().sum::<f64>() / means.len() as f64;
        let spread = if avg > 0.0 { (hi - lo) / avg } else { 0.0 };
        out.push(TrendRow {
            policy: "*".into(),
            n_a,
            metric: WORKLOAD_SPREAD.into(),
            rc_low: rc_lo,
            rc_high: rc_hi,
            median_low: lo,
            median_high: hi,
            direction: spread.to_string(),
        });
    }
    Ok(TrendReport { rows: out, failed_runs })
}

pub fn write_trend_report(path: &Path, report: &TrendReport) -> Result<(), HarnessError> {
    let err = |e: csv::Error| HarnessError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["policy", "n_a", "metric", "rc_low", "rc_high", "median_low", "median_high", "direction"])
        .map_err(err)?;
    for r in &report.rows {
        w.write_record([
            r.policy.clone(),
            r.n_a.to_string(),
            r.metric.clone(),
            r.rc_low.to_string(),
            r.rc_high.to_string(),
            r.median_low.to_string(),
            r.median_high.to_string(),
            r.direction.clone(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}
