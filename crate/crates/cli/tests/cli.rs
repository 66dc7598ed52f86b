//! End-to-end tests driving the `ff` binary. They use the real MNIST
//! files with tiny hidden layers so each training run takes seconds.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ff_core::checkpoint::Checkpoint;
use ff_core::negdata::NegStrategy;

fn data_dir() -> PathBuf {
    if let Ok(dir) = std::env::var("FF_DATA_DIR") {
        return PathBuf::from(dir);
    }
    let staged = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    if staged.join("mnist").is_dir() {
        return staged;
    }
    panic!("MNIST data not staged; run scripts/fetch-data.sh or set FF_DATA_DIR");
}

fn ff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ff"))
        .args(args)
        .env_remove("FF_DATA_DIR")
        .output()
        .expect("spawn ff")
}

fn write_tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.conf");
    std::fs::write(
        &path,
        "# tiny smoke network\n\
         hidden-dims = 32,16\n\
         epochs-per-layer = 1\n\
         seed = 11\n",
    )
    .unwrap();
    path
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn train_writes_checkpoint_log_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_tiny_config(tmp.path());
    let out_dir = tmp.path().join("run");
    let data = data_dir();

    let out = ff(&[
        "train",
        "--dataset-dir",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let ck = Checkpoint::load(&out_dir.join("checkpoint.ffsv1")).unwrap();
    assert_eq!(ck.layers.len(), 2);
    assert_eq!(ck.layers[0].in_dim(), 784);
    assert_eq!(ck.layers[0].out_dim(), 32);
    assert_eq!(ck.layers[1].out_dim(), 16);
    assert_eq!(ck.strategy, NegStrategy::WrongLabel);

    let log = std::fs::read_to_string(out_dir.join("train_log.csv")).unwrap();
    assert!(log.starts_with("step,layer,phase,loss,goodness_mean,lr\n"));
    assert!(log.lines().count() > 200);

    let config_txt = std::fs::read_to_string(out_dir.join("config.txt")).unwrap();
    assert!(config_txt.contains("hidden-dims = 32,16"));
    assert!(config_txt.contains("seed = 11"));
}

#[test]
fn train_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_tiny_config(tmp.path());
    let data = data_dir();
    let mut bytes = Vec::new();
    for name in ["a", "b"] {
        let out_dir = tmp.path().join(name);
        let out = ff(&[
            "train",
            "--dataset-dir",
            data.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
        bytes.push(std::fs::read(out_dir.join("checkpoint.ffsv1")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_tiny_config(tmp.path());
    let out_dir = tmp.path().join("run");
    let data = data_dir();

    let out = ff(&[
        "train",
        "--dataset-dir",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--strategy",
        "masks",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let ck = Checkpoint::load(&out_dir.join("checkpoint.ffsv1")).unwrap();
    assert_eq!(ck.strategy, NegStrategy::Masks { blur_iterations: 3 });
}

#[test]
fn eval_round_trip_appends_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_tiny_config(tmp.path());
    let out_dir = tmp.path().join("run");
    let data = data_dir();

    let out = ff(&[
        "train",
        "--dataset-dir",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let checkpoint = out_dir.join("checkpoint.ffsv1");
    let results = tmp.path().join("eval.csv");
    let mut accuracies = Vec::new();
    for _ in 0..2 {
        let out = ff(&[
            "eval",
            checkpoint.to_str().unwrap(),
            "--dataset-dir",
            data.to_str().unwrap(),
            "--out",
            results.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
        let text = stdout_of(&out);
        let line = text.lines().find(|l| l.starts_with("accuracy")).unwrap();
        accuracies.push(line.to_string());
    }
    assert_eq!(accuracies[0], accuracies[1]);

    let csv = std::fs::read_to_string(&results).unwrap();
    assert!(csv.starts_with("checkpoint,dataset,evaluator,accuracy\n"));
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.contains("voting"));
}

#[test]
fn eval_mode_mismatch_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_tiny_config(tmp.path());
    let out_dir = tmp.path().join("run");
    let data = data_dir();

    let out = ff(&[
        "train",
        "--dataset-dir",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--strategy",
        "masks",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let out = ff(&[
        "eval",
        out_dir.join("checkpoint.ffsv1").to_str().unwrap(),
        "--dataset-dir",
        data.to_str().unwrap(),
        "--evaluator",
        "voting",
        "--out",
        tmp.path().join("eval.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
}

#[test]
fn missing_dataset_exits_2() {
    let out = ff(&[
        "train",
        "--dataset-dir",
        "/definitely/not/here",
        "--epochs-per-layer",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("dataset not found"));
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.conf");
    std::fs::write(&config, "epochz = 3\n").unwrap();
    let out = ff(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("unknown key 'epochz'"));
}

#[test]
fn bad_flag_exits_3() {
    let out = ff(&["train", "--strategy", "sabotage"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn experiment_rejects_schedule_flags() {
    let out = ff(&["experiment", "table1", "--awake-period", "4"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn experiment_custom_grid_single_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = tmp.path().join("one.grid");
    std::fs::write(
        &grid,
        "datasets = mnist\n\
         strategies = wrong-label\n\
         schedules = alternating:2:1\n\
         hidden-dims = 32,16\n\
         epochs-per-layer = 1\n\
         seed = 11\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("grid-out");
    let data = data_dir();

    let out = ff(&[
        "experiment",
        grid.to_str().unwrap(),
        "--dataset-dir",
        data.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--workers",
        "1",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let results = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert_eq!(lines.len(), 2, "one header and one record: {results}");
    assert!(lines[0].starts_with("cell,dataset,strategy,mode"));
    assert!(lines[1].contains("mnist-wrong-label-a2-s1"));
    assert!(lines[1].contains(",ok,"));

    let table = std::fs::read_to_string(out_dir.join("table.md")).unwrap();
    assert!(table.starts_with("| Dataset | Negative data | 2/1 |"));
    assert!(table.contains("| MNIST | Wrong label |"));

    assert!(out_dir
        .join("cells/mnist-wrong-label-a2-s1/checkpoint.ffsv1")
        .exists());
}

#[test]
fn inspect_writes_pgm_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("dump");
    let data = data_dir();

    let out = ff(&[
        "inspect",
        "--dataset-dir",
        data.to_str().unwrap(),
        "--count",
        "3",
        "--seed",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    for i in 0..3 {
        for prefix in ["pos", "neg"] {
            let bytes = std::fs::read(out_dir.join(format!("{prefix}-{i:03}.pgm"))).unwrap();
            assert!(bytes.starts_with(b"P5\n28 28\n255\n"));
            assert_eq!(bytes.len(), 13 + 784);
        }
    }
    // Wrong-label overlays put exactly one bright pixel in the first ten.
    let pos = std::fs::read(out_dir.join("pos-000.pgm")).unwrap();
    let first_ten = &pos[13..23];
    assert_eq!(first_ten.iter().filter(|&&b| b == 255).count(), 1);
    assert_eq!(first_ten.iter().filter(|&&b| b == 0).count(), 9);
}

#[test]
fn inspect_masks_samples_are_hybrids() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("dump");
    let data = data_dir();

    let out = ff(&[
        "inspect",
        "--dataset-dir",
        data.to_str().unwrap(),
        "--strategy",
        "masks",
        "--count",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let neg = std::fs::read(out_dir.join("neg-000.pgm")).unwrap();
    assert_eq!(neg.len(), 13 + 784);
    // Hybrids of two digits carry more ink than the background.
    assert!(neg[13..].iter().filter(|&&b| b > 0).count() > 50);
}

#[test]
fn inspect_count_zero_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("dump");
    let out = ff(&[
        "inspect",
        "--count",
        "0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(!out_dir.exists());
}

#[test]
fn env_var_supplies_dataset_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("dump");
    let data = data_dir();
    let out = Command::new(env!("CARGO_BIN_EXE_ff"))
        .args(["inspect", "--count", "1", "--out", out_dir.to_str().unwrap()])
        .env("FF_DATA_DIR", data.as_os_str())
        .output()
        .expect("spawn ff");
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(out_dir.join("pos-000.pgm").exists());
}
