use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CFG: &str = "area: {width: 300, height: 200}
agents: {count: 4, comm_range: 100, sa_range: 120, max_speed: 1.0, max_accel: 0.1}
tasks: {initial: 8, workload_range: [2, 12]}
policy: {name: cbba}
max_sim_time: 5000
seed: 3
";

fn mrta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrta"))
        .args(args)
        .env_remove("MRTA_OUT_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_outputs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.yaml", CFG);
    let out = dir.path().join("out");
    let o = mrta(&["run", "--config", &cfg, "--seed", "7", "--out", s(&out), "--trace", "on"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.starts_with("mission_time="), "{line}");
    assert!(line.contains("terminated=AllTasksDone"));
    assert!(line.contains("seed=7"));
    for f in ["episode.csv", "agents_final.csv", "timeseries.csv", "trace.jsonl"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let ep = fs::read_to_string(out.join("episode.csv")).unwrap();
    assert!(ep.starts_with("seed,policy,n_a,r_c,mission_time,terminated\n7,cbba,4,100,"));
}

#[test]
fn run_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.yaml", CFG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&mrta(&["run", "--config", &cfg, "--out", s(&a)])), 0);
    assert_eq!(code(&mrta(&["run", "--config", &cfg, "--out", s(&b)])), 0);
    for f in ["episode.csv", "agents_final.csv", "timeseries.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(!a.join("trace.jsonl").exists());
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.yaml", CFG);
    let out = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_mrta"))
        .args(["run", "--config", &cfg])
        .env("MRTA_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(out.join("episode.csv").exists());
}

#[test]
fn missing_config_names_the_path() {
    let o = mrta(&["run", "--config", "/nonexistent/cfg.yaml", "--out", "/tmp/unused"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("/nonexistent/cfg.yaml"), "{}", stderr(&o));
}

#[test]
fn time_limit_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.yaml", &CFG.replace("max_sim_time: 5000", "max_sim_time: 10"));
    let o = mrta(&["run", "--config", &cfg, "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("terminated=TimeLimit"));
}

#[test]
fn bt_flag_overrides_the_tree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.yaml", CFG);
    let bt = write(
        dir.path(),
        "bad.xml",
        "<root><BehaviorTree><Sequence><LocalSensingNode/><FlyNode/></Sequence></BehaviorTree></root>",
    );
    let o = mrta(&["run", "--config", &cfg, "--bt", &bt, "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("UnknownAction"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&mrta(&[])), 1);
    assert_eq!(code(&mrta(&["run"])), 1);
    assert_eq!(code(&mrta(&["validate"])), 1);
    assert_eq!(code(&mrta(&["--help"])), 0);
}

#[test]
fn validate_default_tree_prints_outline() {
    let p = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default_tree.xml");
    let o = mrta(&["validate", "--bt", p]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.starts_with("Sequence\n  LocalSensingNode\n  Fallback\n"), "{out}");
}

#[test]
fn validate_rejects_empty_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let bt = write(dir.path(), "e.xml", "<root><BehaviorTree><Sequence/></BehaviorTree></root>");
    let o = mrta(&["validate", "--bt", &bt]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("EmptyTree"));
}

#[test]
fn validate_config_reports_unknown_policy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.yaml", &CFG.replace("cbba", "auction"));
    let o = mrta(&["validate", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("UnknownPolicy"));
}

#[test]
fn validate_config_prints_normalized_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.yaml", CFG);
    let o = mrta(&["validate", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("max_bundle: 5"), "{text}");
    let again = write(dir.path(), "n.yaml", &text);
    assert_eq!(stdout(&mrta(&["validate", "--config", &again])), text);
}

#[test]
fn validate_reports_missing_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.yaml", &CFG.replace("comm_range: 100, ", ""));
    let o = mrta(&["validate", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("field=agents.comm_range"), "{}", stderr(&o));
}

fn batch_file(dir: &Path, out: &str, extra: &str) -> String {
    write(dir, "c.yaml", CFG);
    write(
        dir,
        &format!("{out}.yaml"),
        &format!(
            "base_seed: 1\noutput_dir: {out}\nscenarios:\n  - {{name: lo, config: c.yaml, overrides: {{agents: {{comm_range: 40}}}}, num_runs: 3}}\n  - {{name: hi, config: c.yaml, overrides: {{agents: {{comm_range: 200}}}}, num_runs: 3}}\n{extra}"
        ),
    )
}

#[test]
fn batch_jobs_do_not_change_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let one = batch_file(dir.path(), "one", "");
    let many = batch_file(dir.path(), "many", "");
    let o = mrta(&["batch", "--batch", &one, "--jobs", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("ran=6 skipped=0 failed=0"));
    assert_eq!(code(&mrta(&["batch", "--batch", &many, "--jobs", "8"])), 0);
    for f in ["summary_all.csv", "lo/summary.csv", "hi/summary.csv", "trend_report.csv"] {
        assert_eq!(
            fs::read(dir.path().join("one").join(f)).unwrap(),
            fs::read(dir.path().join("many").join(f)).unwrap(),
            "{f}"
        );
    }
    let again = mrta(&["batch", "--batch", &one]);
    assert!(stdout(&again).starts_with("ran=0 skipped=6"));

    let o = mrta(&["summarize", "--dir", s(&dir.path().join("one"))]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("scenario=")).count(), 6);
    assert!(stdout(&o).contains("trend_report=true"));
}

#[test]
fn batch_duplicate_names_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let b = batch_file(dir.path(), "dup", "  - {name: lo, config: c.yaml, num_runs: 1}\n");
    let o = mrta(&["batch", "--batch", &b]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("DuplicateScenario"));
    assert!(!dir.path().join("dup").exists());
}

#[test]
fn batch_with_failed_runs_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let b = batch_file(dir.path(), "part", "");
    // a run that cannot write its outputs fails; the rest carry on
    let blocked = dir.path().join("part/hi/1");
    fs::create_dir_all(blocked.parent().unwrap()).unwrap();
    fs::write(&blocked, "not a directory").unwrap();
    let o = mrta(&["batch", "--batch", &b, "--jobs", "2"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stdout(&o).contains("failed=1"), "{}", stdout(&o));
}
