use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn shardmove(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shardmove"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = shardmove(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn small_trace(dir: &Path) -> String {
    let path = dir.join("t.txt");
    let p = path.to_str().unwrap();
    ok(&["generate", "--synthetic", "communities", "--communities", "4", "--accounts", "100", "--txs", "400", "--out", p]);
    p.to_string()
}

#[test]
fn run_writes_rounds_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let trace = small_trace(dir.path());
    let out = dir.path().join("d");
    ok(&["run", "--policy", "scheduler", "--shards", "16", "--capacity", "10", "--trace", &trace, "--out", out.to_str().unwrap()]);
    let rounds = fs::read_to_string(out.join("rounds.csv")).unwrap();
    assert!(rounds.starts_with("round,processed,wasted,cross_count,migrations,load_0,"));
    assert!(!rounds.contains('\r'));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().starts_with("scheduler,2pc,"));
    assert!(!out.join("epochs.csv").exists());
}

#[test]
fn sweep_has_one_row_per_policy_and_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    ok(&[
        "sweep", "--axis", "shards", "--values", "1,4,8,16,32,60", "--policies", "hash,partition,scheduler",
        "--synthetic", "zipf", "--accounts", "300", "--txs", "1500", "--capacity", "20",
        "--out", out.to_str().unwrap(),
    ]);
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 18);
    let policies: Vec<&str> = sweep.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(policies.iter().filter(|p| **p == "partition").count(), 6);
    assert!(out.join("runs/partition-shards-60/rounds.csv").exists());
}

#[test]
fn unknown_flag_exits_one_with_usage() {
    let out = shardmove(&["run", "--frobnicate", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bad_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    for args in [
        vec!["run", "--trace", "/nonexistent/trace.txt", "--out", o],
        vec!["run", "--synthetic", "zipf", "--shards", "0", "--out", o],
        vec!["run", "--out", o],
        vec!["run", "--synthetic", "gaussian", "--out", o],
        vec!["sweep", "--synthetic", "zipf", "--axis", "window", "--values", "1", "--out", o],
    ] {
        let res = shardmove(&args);
        assert_eq!(res.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&res.stderr).contains("error"), "{args:?}");
    }
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "0 tx1 1 zz\n").unwrap();
    let res = shardmove(&["run", "--trace", bad.to_str().unwrap(), "--out", o]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("exp.conf");
    fs::write(&conf, "synthetic = zipf\naccounts = 100\ntxs = 300\nshards = 8\ncapacity = 10\npolicy = hash\n").unwrap();
    let out = dir.path().join("o");
    ok(&["run", "--config", conf.to_str().unwrap(), "--shards", "2", "--out", out.to_str().unwrap()]);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "hash");
    assert_eq!(row[3], "2");
    assert_eq!(row[5], "10");
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "run", "--synthetic", "communities-zipf", "--accounts", "500", "--txs", "3000", "--shards", "8",
            "--capacity", "20", "--economics", "--epoch-length", "5", "--seed", "11",
            "--out", out.to_str().unwrap(),
        ]);
        ["rounds.csv", "summary.csv", "epochs.csv"].map(|f| fs::read(out.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}
