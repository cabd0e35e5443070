//! Scenario configuration: the YAML schema, defaults and validation.
//!
//! The on-disk document mirrors [`ScenarioConfig`] field for field. Every
//! field except `area`, `agents.count`, `agents.comm_range`, `tasks.initial`
//! and `policy.name` has a default taken from the reference experiment
//! parameters (1 Hz, v_max 0.25, a_max 0.01, ω_max 0.25, r_p 300, workloads
//! in [6, 60], f_s 100, λ 0.999).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::BUILTIN_POLICIES;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("value out of range for `{0}`")]
    OutOfRange(String),
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    /// Field path for `MissingField` / `OutOfRange`.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::MissingField(f) | ConfigError::OutOfRange(f) => Some(f),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Raw document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawArea {
    pub width: Option<f64>,
    pub height: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAgents {
    pub count: Option<u32>,
    pub max_speed: Option<f64>,
    pub max_accel: Option<f64>,
    pub max_angular_speed: Option<f64>,
    pub work_rate: Option<f64>,
    pub comm_range: Option<f64>,
    pub sa_range: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpawn {
    pub count: Option<u32>,
    pub interval_s: Option<f64>,
    pub repetitions: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTasks {
    pub initial: Option<u32>,
    pub workload_range: Option<[f64; 2]>,
    pub dynamic_spawn: Option<RawSpawn>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPolicy {
    pub name: Option<String>,
    pub reward_rule: Option<RewardRule>,
    pub cost_scale: Option<CostScale>,
    pub social_inhibition: Option<f64>,
    pub discount: Option<f64>,
    pub max_bundle: Option<u32>,
    /// `null` disables the starvation reset; `.inf` is accepted too.
    #[serde(default, with = "optional_timeout")]
    pub starvation_timeout: Option<Option<f64>>,
    pub exploration_duration: Option<f64>,
    pub arrival_radius: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTrace {
    pub enabled: Option<bool>,
    pub every: Option<u64>,
}

/// The configuration document as parsed, before defaults and validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub area: Option<RawArea>,
    pub sim_rate: Option<f64>,
    pub agents: Option<RawAgents>,
    pub tasks: Option<RawTasks>,
    pub policy: Option<RawPolicy>,
    pub bt_xml_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_sim_time: Option<f64>,
    pub trace: Option<RawTrace>,
}

/// Distinguishes "key absent" (outer `None`) from an explicit `null`
/// (inner `None`).
mod optional_timeout {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Option<f64>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None | Some(None) => s.serialize_none(),
            Some(Some(x)) => x.serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<f64>>, D::Error> {
        Option::<f64>::deserialize(d).map(Some)
    }
}

impl RawConfig {
    pub fn from_yaml(text: &str) -> Result<Self, ConfigError> {
        serde_yaml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_value(value: serde_yaml::Value) -> Result<Self, ConfigError> {
        serde_yaml::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("raw config is always serializable")
    }
}

// ---------------------------------------------------------------------------
// Validated configuration
// ---------------------------------------------------------------------------

/// How a task's reward R_j is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardRule {
    /// R_j is the task's (initial) workload.
    #[default]
    Workload,
    /// R_j = 1 for every task.
    Unit,
}

/// Units of the distance-based cost c_ij.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostScale {
    /// Travel time: distance / v_max.
    #[default]
    TravelTime,
    /// Raw distance in map units.
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub count: u32,
    pub max_speed: f64,
    pub max_accel: f64,
    pub max_angular_speed: f64,
    pub work_rate: f64,
    pub comm_range: f64,
    pub sa_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpawnSchedule {
    pub count: u32,
    pub interval_s: f64,
    pub repetitions: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskParams {
    pub initial: u32,
    pub workload_lo: f64,
    pub workload_hi: f64,
    pub dynamic_spawn: SpawnSchedule,
}

impl TaskParams {
    pub fn total_count(&self) -> u64 {
        self.initial as u64 + self.dynamic_spawn.count as u64 * self.dynamic_spawn.repetitions as u64
    }

    pub fn expected_total_workload(&self) -> f64 {
        self.total_count() as f64 * 0.5 * (self.workload_lo + self.workload_hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub name: String,
    pub reward_rule: RewardRule,
    pub cost_scale: CostScale,
    /// Social inhibition factor f_s.
    pub social_inhibition: f64,
    /// Discount factor λ.
    pub discount: f64,
    /// Bundle capacity L_t.
    pub max_bundle: u32,
    /// Seconds; `None` disables the reset.
    pub starvation_timeout: Option<f64>,
    pub exploration_duration: f64,
    pub arrival_radius: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            name: "cbba".into(),
            reward_rule: RewardRule::Workload,
            cost_scale: CostScale::TravelTime,
            social_inhibition: 100.0,
            discount: 0.999,
            max_bundle: 5,
            starvation_timeout: Some(10.0),
            exploration_duration: 1000.0,
            arrival_radius: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceParams {
    pub enabled: bool,
    /// Emit one trace line every `every` ticks.
    pub every: u64,
}

/// Fully-populated, validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub area: Area,
    pub sim_rate: f64,
    pub agents: AgentParams,
    pub tasks: TaskParams,
    pub policy: PolicyParams,
    pub bt_xml_path: Option<PathBuf>,
    pub seed: u64,
    pub max_sim_time: f64,
    pub trace: TraceParams,
}

impl ScenarioConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.sim_rate
    }

    /// 10x a naive serial completion bound: all work done by the fleet in
    /// parallel plus one half-diagonal trip per task, after the last spawn.
    pub fn default_max_sim_time(area: Area, agents: &AgentParams, tasks: &TaskParams) -> f64 {
        let n = agents.count.max(1) as f64;
        let last_spawn = tasks.dynamic_spawn.interval_s * tasks.dynamic_spawn.repetitions as f64;
        let work = tasks.expected_total_workload() / (n * agents.work_rate);
        let travel = tasks.total_count() as f64 * 0.5 * area.diagonal() / (n * agents.max_speed);
        10.0 * (last_spawn + work + travel)
    }

    /// Inverse of [`validate_config`]: the fully explicit document.
    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            area: Some(RawArea {
                width: Some(self.area.width),
                height: Some(self.area.height),
            }),
            sim_rate: Some(self.sim_rate),
            agents: Some(RawAgents {
                count: Some(self.agents.count),
                max_speed: Some(self.agents.max_speed),
                max_accel: Some(self.agents.max_accel),
                max_angular_speed: Some(self.agents.max_angular_speed),
                work_rate: Some(self.agents.work_rate),
                comm_range: Some(self.agents.comm_range),
                sa_range: Some(self.agents.sa_range),
            }),
            tasks: Some(RawTasks {
                initial: Some(self.tasks.initial),
                workload_range: Some([self.tasks.workload_lo, self.tasks.workload_hi]),
                dynamic_spawn: Some(RawSpawn {
                    count: Some(self.tasks.dynamic_spawn.count),
                    interval_s: Some(self.tasks.dynamic_spawn.interval_s),
                    repetitions: Some(self.tasks.dynamic_spawn.repetitions),
                }),
            }),
            policy: Some(RawPolicy {
                name: Some(self.policy.name.clone()),
                reward_rule: Some(self.policy.reward_rule),
                cost_scale: Some(self.policy.cost_scale),
                social_inhibition: Some(self.policy.social_inhibition),
                discount: Some(self.policy.discount),
                max_bundle: Some(self.policy.max_bundle),
                starvation_timeout: Some(self.policy.starvation_timeout),
                exploration_duration: Some(self.policy.exploration_duration),
                arrival_radius: Some(self.policy.arrival_radius),
            }),
            bt_xml_path: self.bt_xml_path.clone(),
            seed: Some(self.seed),
            max_sim_time: Some(self.max_sim_time),
            trace: Some(RawTrace {
                enabled: Some(self.trace.enabled),
                every: Some(self.trace.every),
            }),
        }
    }

    pub fn to_yaml(&self) -> String {
        self.to_raw().to_yaml()
    }

    pub fn from_yaml(text: &str) -> Result<Self, ConfigError> {
        validate_config(RawConfig::from_yaml(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_yaml(&text)?;
        // A relative BT path is relative to the config file.
        if let (Some(bt), Some(dir)) = (&cfg.bt_xml_path, path.parent()) {
            if bt.is_relative() {
                cfg.bt_xml_path = Some(dir.join(bt));
            }
        }
        Ok(cfg)
    }
}

fn require<T>(v: Option<T>, field: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::MissingField(field.to_string()))
}

fn positive(v: f64, field: &str) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::OutOfRange(field.to_string()))
    }
}

/// Validate against the built-in policy names.
pub fn validate_config(raw: RawConfig) -> Result<ScenarioConfig, ConfigError> {
    validate_config_with(raw, |name| BUILTIN_POLICIES.contains(&name))
}

/// Validate, accepting any policy name for which `known_policy` is true.
pub fn validate_config_with(
    raw: RawConfig,
    known_policy: impl Fn(&str) -> bool,
) -> Result<ScenarioConfig, ConfigError> {
    let area_raw = require(raw.area, "area")?;
    let area = Area {
        width: positive(require(area_raw.width, "area.w")?, "area.w")?,
        height: positive(require(area_raw.height, "area.h")?, "area.h")?,
    };
    let sim_rate = positive(raw.sim_rate.unwrap_or(1.0), "sim_rate")?;

    let ag = require(raw.agents, "agents")?;
    let count = require(ag.count, "agents.count")?;
    if count == 0 {
        return Err(ConfigError::OutOfRange("agents.count".into()));
    }
    let agents = AgentParams {
        count,
        max_speed: positive(ag.max_speed.unwrap_or(0.25), "agents.max_speed")?,
        max_accel: positive(ag.max_accel.unwrap_or(0.01), "agents.max_accel")?,
        max_angular_speed: positive(ag.max_angular_speed.unwrap_or(0.25), "agents.max_angular_speed")?,
        work_rate: positive(ag.work_rate.unwrap_or(1.0), "agents.work_rate")?,
        comm_range: positive(require(ag.comm_range, "agents.comm_range")?, "agents.comm_range")?,
        sa_range: positive(ag.sa_range.unwrap_or(300.0), "agents.sa_range")?,
    };

    let tk = require(raw.tasks, "tasks")?;
    let initial = require(tk.initial, "tasks.initial")?;
    let [lo, hi] = tk.workload_range.unwrap_or([6.0, 60.0]);
    let lo = positive(lo, "task_workload_range")?;
    let hi = positive(hi, "task_workload_range")?;
    if lo > hi {
        return Err(ConfigError::OutOfRange("task_workload_range".into()));
    }
    let sp = tk.dynamic_spawn.unwrap_or_default();
    let dynamic_spawn = SpawnSchedule {
        count: sp.count.unwrap_or(0),
        interval_s: positive(sp.interval_s.unwrap_or(1000.0), "tasks.dynamic_spawn.interval_s")?,
        repetitions: sp.repetitions.unwrap_or(0),
    };
    let tasks = TaskParams {
        initial,
        workload_lo: lo,
        workload_hi: hi,
        dynamic_spawn,
    };

    let pr = require(raw.policy, "policy")?;
    let name = require(pr.name, "policy.name")?;
    if !known_policy(&name) {
        return Err(ConfigError::UnknownPolicy(name));
    }
    let defaults = PolicyParams::default();
    let social_inhibition = positive(
        pr.social_inhibition.unwrap_or(defaults.social_inhibition),
        "policy.social_inhibition",
    )?;
    let discount = pr.discount.unwrap_or(defaults.discount);
    if !(0.0..=1.0).contains(&discount) {
        return Err(ConfigError::OutOfRange("policy.discount".into()));
    }
    let max_bundle = pr.max_bundle.unwrap_or(defaults.max_bundle);
    if max_bundle == 0 {
        return Err(ConfigError::OutOfRange("policy.max_bundle".into()));
    }
    let starvation_timeout = match pr.starvation_timeout {
        None => defaults.starvation_timeout,
        Some(None) => None,
        Some(Some(t)) if t == f64::INFINITY => None,
        Some(Some(t)) => Some(positive(t, "policy.starvation_timeout")?),
    };
    let policy = PolicyParams {
        name,
        reward_rule: pr.reward_rule.unwrap_or_default(),
        cost_scale: pr.cost_scale.unwrap_or_default(),
        social_inhibition,
        discount,
        max_bundle,
        starvation_timeout,
        exploration_duration: positive(
            pr.exploration_duration.unwrap_or(defaults.exploration_duration),
            "policy.exploration_duration",
        )?,
        arrival_radius: positive(
            pr.arrival_radius.unwrap_or(defaults.arrival_radius),
            "policy.arrival_radius",
        )?,
    };

    let max_sim_time = match raw.max_sim_time {
        Some(t) => positive(t, "max_sim_time")?,
        None => ScenarioConfig::default_max_sim_time(area, &agents, &tasks),
    };
    let tr = raw.trace.unwrap_or_default();
    let every = tr.every.unwrap_or(1);
    if every == 0 {
        return Err(ConfigError::OutOfRange("trace.every".into()));
    }

    Ok(ScenarioConfig {
        area,
        sim_rate,
        agents,
        tasks,
        policy,
        bt_xml_path: raw.bt_xml_path,
        seed: raw.seed.unwrap_or(0),
        max_sim_time,
        trace: TraceParams {
            enabled: tr.enabled.unwrap_or(false),
            every,
        },
    })
}
