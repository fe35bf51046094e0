use std::path::Path;
use std::process::Command;

fn ethqbm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ethqbm")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn level_stats_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"n_visible": [3], "instances": 2, "gamma_ratios": [0.5, 1]}"#);
    let mut csvs = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(name);
        let res = ethqbm(&["level-stats", "--config", &config, "--out", out.to_str().unwrap(), "--seed", "11", "--threads", threads]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        for file in ["config.json", "metrics.csv", "plotdata.csv", "record.json"] {
            assert!(out.join(file).exists(), "{file}");
        }
        let echo = std::fs::read_to_string(out.join("config.json")).unwrap();
        let value: serde_json::Value = serde_json::from_str(&echo).unwrap();
        assert_eq!(value["seed"], 11);
        csvs.push(std::fs::read(out.join("metrics.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn backend_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"n_visible": [2], "instances": 1, "times": [0.5]}"#);
    let out = dir.path().join("run");
    let res = ethqbm(&[
        "quench-accuracy-vs-time", "--config", &config, "--out", out.to_str().unwrap(), "--backend", "quench+noise",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let echo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["backend"], "quench+noise");
    assert_eq!(echo["kind"], "quench-accuracy-vs-time");
}

#[test]
fn train_then_resume() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rbm");
    let res = ethqbm(&["train", "--model", "rbm", "--nv", "3", "--epochs", "2", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let first = String::from_utf8(res.stdout).unwrap();
    assert!(first.starts_with("rbm: KL"));
    let res = ethqbm(&["resume", out.to_str().unwrap()]);
    assert!(res.status.success());
    assert_eq!(String::from_utf8(res.stdout).unwrap(), first);
}

#[test]
fn bad_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!ethqbm(&["train-kl", "--backend", "annealer"]).status.success());
    let config = write_config(dir.path(), r#"{"kind": "level-stats", "n_visible": [3]}"#);
    assert!(!ethqbm(&["train-kl", "--config", &config]).status.success());
    let config = write_config(dir.path(), r#"{"n_visible": [3], "unknown": 1}"#);
    assert!(!ethqbm(&["level-stats", "--config", &config]).status.success());
    assert!(!ethqbm(&["resume", dir.path().join("missing").to_str().unwrap()]).status.success());
}
