use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ddqn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddqn"))
        .args(args)
        .output()
        .expect("run ddqn")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &str = r#"{"agent":{"episodes":3,"memory_capacity":300,"batch_size":16,
    "hidden":[12,12],"max_steps_per_episode":100},"run":{"seed":3,"eval_trials":4}}"#;

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.json");
    fs::write(&path, SMALL).unwrap();
    path
}

#[test]
fn missing_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ddqn(&[
        "train",
        "--config",
        p(&tmp.path().join("nope.json")),
        "--out",
        p(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read config"));
}

#[test]
fn invalid_config_values_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    for text in [
        r#"{"agent":{"gamma":1.5}}"#,
        r#"{"agent":{"gama":0.9}}"#,
        "not json",
    ] {
        fs::write(&cfg, text).unwrap();
        let out = ddqn(&["train", "--config", p(&cfg), "--out", p(tmp.path())]);
        assert_eq!(out.status.code(), Some(2), "{text}");
    }
    let out = ddqn(&["sweep", "--axes", "bogus=1,2", "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = ddqn(&["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupt_checkpoint_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let ck = tmp.path().join("checkpoint.json");
    fs::write(&ck, r#"{"version":1,"sizes":[8,4]}"#).unwrap();
    let out = ddqn(&["eval", "--checkpoint", p(&ck), "--trials", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ddqn(&["eval", "--checkpoint", p(&tmp.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_or_unknown_csv_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("log.csv");
    for text in [
        "",
        "episode,steps,reward,epsilon,ma10,ma100\n",
        "a,b\n1,2\n",
    ] {
        fs::write(&csv, text).unwrap();
        let out = ddqn(&["plot", "--input", p(&csv)]);
        assert_eq!(out.status.code(), Some(1), "{text:?}");
    }
}

#[test]
fn train_then_eval_writes_expected_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let run = tmp.path().join("run");
    let out = ddqn(&["train", "--config", p(&cfg), "--out", p(&run), "--quiet"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());

    let log = fs::read_to_string(run.join("log.csv")).unwrap();
    assert_eq!(log.lines().count(), 4);
    assert!(log.starts_with("episode,steps,reward,epsilon,ma10,ma100\n"));

    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["checkpoint"], "checkpoint.json");
    assert_eq!(result["summary"]["episodes"], 3);
    assert_eq!(
        result["config"]["agent"]["hidden"],
        serde_json::json!([12, 12])
    );
    // The stored config is itself a valid config file.
    let again = tmp.path().join("again.json");
    fs::write(&again, result["config"].to_string()).unwrap();
    let rerun = tmp.path().join("rerun");
    let out = ddqn(&[
        "train",
        "--config",
        p(&again),
        "--out",
        p(&rerun),
        "--quiet",
    ]);
    assert!(out.status.success());
    assert_eq!(
        fs::read(run.join("checkpoint.json")).unwrap(),
        fs::read(rerun.join("checkpoint.json")).unwrap()
    );

    let out = ddqn(&[
        "eval",
        "--config",
        p(&cfg),
        "--checkpoint",
        p(&run.join("checkpoint.json")),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.starts_with("mean ") && stdout.trim_end().ends_with("trials 4"),
        "{stdout}"
    );
    let eval = fs::read_to_string(run.join("eval.csv")).unwrap();
    let lines: Vec<&str> = eval.lines().collect();
    assert_eq!(lines[0], "trial,reward,steps,outcome");
    assert_eq!(lines.len(), 5);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ddqn(&["train", "--config", p(&cfg), "--out", p(&a), "--quiet"]);
    ddqn(&[
        "train",
        "--config",
        p(&cfg),
        "--out",
        p(&b),
        "--quiet",
        "--seed",
        "4",
    ]);
    assert_ne!(
        fs::read(a.join("log.csv")).unwrap(),
        fs::read(b.join("log.csv")).unwrap()
    );
}

#[test]
fn sweep_is_identical_serial_and_parallel() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let serial = tmp.path().join("serial");
    let parallel = tmp.path().join("parallel");
    let common = [
        "sweep",
        "--config",
        p(&cfg),
        "--axes",
        "lambda=0.3,0.6",
        "--axes",
        "hidden=8x8,12x12",
        "--seeds",
        "0,1",
        "--episodes",
        "2",
        "--eval-trials",
        "2",
        "--quiet",
    ];
    let mut args = common.to_vec();
    args.extend(["--threads", "1", "--out", p(&serial)]);
    assert!(ddqn(&args).status.success());
    let mut args = common.to_vec();
    args.extend(["--threads", "3", "--out", p(&parallel)]);
    assert!(ddqn(&args).status.success());

    let a = fs::read_to_string(serial.join("sweep.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(parallel.join("sweep.csv")).unwrap());
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(
        lines[0],
        "lambda,hidden,seed,final_ma100,eval_mean,eval_std,status"
    );
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));

    let out = ddqn(&[
        "plot",
        "--input",
        p(&serial.join("sweep.csv")),
        "--out",
        p(tmp.path()),
        "--quiet",
    ]);
    assert!(out.status.success());
    let svg = fs::read_to_string(tmp.path().join("sweep.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}
