use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use delaypo_cli::config::RunConfig;
use delaypo_cli::harness::Summary;
use delaypo_cli::scenarios;

fn delaypo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delaypo")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{
  "env": { "kind": "random_tabular", "states": 3, "actions": 2, "horizon": 3 },
  "costs": { "kind": "iid_uniform" },
  "delays": { "kind": "uniform", "lo": 0, "hi": 3 },
  "algorithm": "dapo_known",
  "episodes": 5,
  "seeds": [4, 9]
}"#;

#[test]
fn run_writes_one_row_per_episode_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let status = delaypo(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for seed in [4, 9] {
        let csv = fs::read_to_string(out.join(format!("run_seed{seed}.csv"))).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "episode,delay,arrivals,learner_value,cum_regret");
        assert_eq!(lines.len(), 6);
    }
    let summary: Summary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.episodes, 5);
    assert_eq!(summary.seeds.iter().map(|s| s.seed).collect::<Vec<_>>(), vec![4, 9]);
    assert!(summary.seeds.iter().all(|s| s.invariants_clean));
    assert!(out.join("timing.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert!(delaypo(&["run", "--config", &config, "--out", out.to_str().unwrap()]).status.success());
    }
    for file in ["run_seed4.csv", "run_seed9.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn single_seed_flag_restricts_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert!(delaypo(&["run", "--config", &config, "--seed", "9", "--out", out.to_str().unwrap()]).status.success());
    assert!(out.join("run_seed9.csv").exists());
    assert!(!out.join("run_seed4.csv").exists());
}

#[test]
fn zero_costs_give_zero_regret() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SMALL.replace(r#""kind": "iid_uniform""#, r#""kind": "zero""#));
    let out = dir.path().join("out");
    assert!(delaypo(&["run", "--config", &config, "--out", out.to_str().unwrap()]).status.success());
    let csv = fs::read_to_string(out.join("run_seed4.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields[3], 0.0);
        assert_eq!(fields[4], 0.0);
    }
}

#[test]
fn bad_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        SMALL.replace(r#""episodes": 5"#, r#""episodes": 0"#),
        SMALL.replace(r#""lo": 0"#, r#""lo": -1"#),
        SMALL.replace("dapo_known", "dapo_magic"),
        "{ not json".to_string(),
    ] {
        let config = write_config(dir.path(), &text);
        let out = dir.path().join("out");
        let result = delaypo(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
        assert_eq!(result.status.code(), Some(2), "{text}");
    }
    assert_eq!(delaypo(&["run", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn oversized_resampling_without_override_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace(r#""kind": "random_tabular", "states": 3, "actions": 2, "horizon": 3"#,
            r#""kind": "low_rank", "states": 3, "actions": 2, "horizon": 3, "dim": 2"#)
        .replace("dapo_known", "dapo_linear")
        .replace(r#""episodes": 5"#, r#""episodes": 50"#);
    let config = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    assert_eq!(delaypo(&["run", "--config", &config, "--out", out.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn sweep_writes_a_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let result = delaypo(&[
        "sweep", "--config", &config, "--axis", "delay", "--values", "0,2,4", "--out", out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("delay,0,"));
    assert!(lines[3].starts_with("delay,4,"));
    assert_eq!(delaypo(&["sweep", "--config", &config, "--axis", "colour", "--values", "1"]).status.code(), Some(2));
}

#[test]
fn injected_fault_fails_verification() {
    let clean = delaypo(&["verify", "--filter", "unknown-exact", "--format", "tsv"]);
    assert!(clean.status.success());
    let faulty = delaypo(&["verify", "--filter", "learner-values", "--inject-fault", "flip-ratio"]);
    assert!(faulty.status.success(), "value recheck does not depend on the ratio");
    let caught = delaypo(&["verify", "--filter", "ratio-invariant", "--inject-fault", "flip-ratio", "--format", "tsv"]);
    assert_eq!(caught.status.code(), Some(1));
    let text = String::from_utf8(caught.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("ratio-invariant\tfail"));
}

#[test]
fn shipped_scenarios_parse() {
    let all = scenarios::all().unwrap();
    assert_eq!(all.len(), scenarios::SHIPPED.len());
    let sandwich = scenarios::shipped("sandwich").unwrap();
    assert_eq!((sandwich.episodes, sandwich.seeds.len()), (5000, 10));
    let text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/sublinearity.json")).unwrap();
    assert_eq!(RunConfig::from_json(&text).unwrap(), scenarios::shipped("sublinearity").unwrap());
}

#[test]
fn single_point_sweep_matches_the_run_summary() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(r#""kind": "uniform", "lo": 0, "hi": 3"#, r#""kind": "constant", "delay": 2"#);
    let config = write_config(dir.path(), &text);
    let (run_out, sweep_out) = (dir.path().join("run"), dir.path().join("sweep"));
    assert!(delaypo(&["run", "--config", &config, "--out", run_out.to_str().unwrap()]).status.success());
    let summary: Summary = serde_json::from_str(&fs::read_to_string(run_out.join("summary.json")).unwrap()).unwrap();
    let args = ["sweep", "--config", &config, "--axis", "delay", "--values", "2", "--out", sweep_out.to_str().unwrap()];
    assert!(delaypo(&args).status.success());
    let first = fs::read_to_string(sweep_out.join("sweep.csv")).unwrap();
    let row: Vec<&str> = first.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2].parse::<f64>().unwrap(), summary.final_regret_mean);
    assert_eq!(row[3].parse::<f64>().unwrap(), summary.final_regret_std);
    assert!(delaypo(&args).status.success());
    assert_eq!(first, fs::read_to_string(sweep_out.join("sweep.csv")).unwrap());
}
