//! `mrta`: run episodes and batches, summarize batch output, validate inputs.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 episode hit the time
//! limit, 3 some batch runs failed. Results go to stdout as `key=value`
//! pairs; diagnostics go to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use mrta_core::btree::{parse_bt_xml, BtError};
use mrta_core::engine::{builtin_actions, run_to_dir};
use mrta_core::harness::{run_batch, summarize_dir, BatchSpec, HarnessError, TREND_REPORT_CSV};
use mrta_core::{ConfigError, EngineError, PolicyRegistry, ScenarioConfig, Termination};

const EXIT_ERROR: u8 = 1;
const EXIT_TIME_LIMIT: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "mrta", version, about = "Decentralized multi-robot task allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode.
    Run(RunArgs),
    /// Run a Monte Carlo batch.
    Batch(BatchArgs),
    /// Recompute the summaries of an existing batch output directory.
    Summarize(SummarizeArgs),
    /// Check a config or behavior tree file without running it.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Defaults to the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "MRTA_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Defaults to the config's trace setting.
    #[arg(long, value_enum)]
    trace: Option<OnOff>,
    /// Behavior tree XML, replacing the config's `bt_xml_path`.
    #[arg(long)]
    bt: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    batch: PathBuf,
    /// Worker threads; defaults to the spec's `parallelism`, then the core count.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    dir: PathBuf,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ValidateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bt: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            report(&e);
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn report(e: &anyhow::Error) {
    let field = e
        .chain()
        .find_map(|c| c.downcast_ref::<ConfigError>().and_then(ConfigError::field))
        .map(|f| format!(" field={f}"))
        .unwrap_or_default();
    eprintln!("error={}{field} message={e}", kind(e));
}

fn config_kind(e: &ConfigError) -> &'static str {
    match e {
        ConfigError::MissingField(_) => "MissingField",
        ConfigError::OutOfRange(_) => "OutOfRange",
        ConfigError::UnknownPolicy(_) => "UnknownPolicy",
        ConfigError::Parse(_) => "Parse",
        ConfigError::Io { .. } => "Io",
    }
}

fn bt_kind(e: &BtError) -> &'static str {
    match e {
        BtError::XmlSyntax(_) => "XmlSyntax",
        BtError::EmptyTree(_) => "EmptyTree",
        BtError::ActionWithChildren(_) => "ActionWithChildren",
        BtError::UnknownAction(_) => "UnknownAction",
        BtError::DuplicateAction(_) => "DuplicateAction",
        BtError::EmptyActionName => "EmptyActionName",
    }
}

/// Name of the most specific known error in the chain.
fn kind(e: &anyhow::Error) -> &'static str {
    for c in e.chain() {
        if let Some(e) = c.downcast_ref::<ConfigError>() {
            return config_kind(e);
        }
        if let Some(e) = c.downcast_ref::<BtError>() {
            return bt_kind(e);
        }
        if let Some(e) = c.downcast_ref::<EngineError>() {
            return match e {
                EngineError::Config(c) => config_kind(c),
                EngineError::Bt(b) => bt_kind(b),
                EngineError::Policy(_) => "UnknownPolicy",
                EngineError::Io { .. } => "Io",
            };
        }
        if let Some(e) = c.downcast_ref::<HarnessError>() {
            return match e {
                HarnessError::Config { source, .. } => config_kind(source),
                HarnessError::Spec(_) => "Spec",
                HarnessError::DuplicateScenario(_) => "DuplicateScenario",
                HarnessError::Io { .. } => "Io",
                HarnessError::BadEpisode { .. } => "BadEpisode",
                HarnessError::EmptyInput => "EmptyInput",
                HarnessError::InsufficientScenarios => "InsufficientScenarios",
            };
        }
    }
    "Error"
}

fn load_config(path: &Path) -> anyhow::Result<ScenarioConfig> {
    Ok(ScenarioConfig::load(path)?)
}

fn cmd_run(a: RunArgs) -> anyhow::Result<u8> {
    let mut config = load_config(&a.config)?;
    if let Some(bt) = a.bt {
        config.bt_xml_path = Some(bt);
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(t) = a.trace {
        config.trace.enabled = matches!(t, OnOff::On);
    }
    let r = run_to_dir(&config, &PolicyRegistry::with_builtins(), None, &a.out)?;
    println!(
        "mission_time={} terminated={} seed={} policy={} distance_total={} workload_total={} out={}",
        r.mission_time,
        r.terminated,
        r.seed,
        r.policy,
        r.total_distance(),
        r.total_workload(),
        a.out.display()
    );
    Ok(match r.terminated {
        Termination::AllTasksDone => 0,
        Termination::TimeLimit => EXIT_TIME_LIMIT,
    })
}

fn cmd_batch(a: BatchArgs) -> anyhow::Result<u8> {
    let spec = BatchSpec::load(&a.batch)?;
    let r = run_batch(&spec, &PolicyRegistry::with_builtins(), a.jobs)?;
    println!(
        "ran={} skipped={} failed={} output_dir={}",
        r.ran,
        r.skipped,
        r.failed,
        r.output_dir.display()
    );
    Ok(if r.failed > 0 { EXIT_PARTIAL } else { 0 })
}

fn cmd_summarize(a: SummarizeArgs) -> anyhow::Result<u8> {
    let rows = summarize_dir(&a.dir)?;
    for r in &rows {
        let s = r.summary;
        println!(
            "scenario={} metric={} n={} min={} q1={} median={} q3={} max={} mean={} stddev={} failed={}",
            r.scenario, r.metric, s.n, s.min, s.q1, s.median, s.q3, s.max, s.mean, s.stddev, r.failed
        );
    }
    println!("trend_report={}", a.dir.join(TREND_REPORT_CSV).exists());
    Ok(0)
}

fn check_bt(path: &Path) -> anyhow::Result<mrta_core::btree::BtNode> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow!("cannot read {}: {e}", path.display()))?;
    let tree = parse_bt_xml(&text)?;
    builtin_actions().check_tree(&tree)?;
    Ok(tree)
}

fn cmd_validate(a: ValidateArgs) -> anyhow::Result<u8> {
    if let Some(path) = a.config {
        let config = load_config(&path)?;
        if let Some(bt) = &config.bt_xml_path {
            check_bt(bt)?;
        }
        print!("{}", config.to_yaml());
        println!("# valid=true");
    } else if let Some(path) = a.bt {
        let tree = check_bt(&path)?;
        print!("{tree}");
        println!("valid=true");
    }
    Ok(0)
}
