//! End-to-end tests of the binary: exit statuses, artifact layout, and
//! determinism, driven through real process invocations.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ntlbench"));
    // Keep assertions independent of the caller's environment.
    cmd.env_remove("NTLBENCH_SEED");
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn assert_exit(output: &Output, expected: i32) {
    assert_eq!(
        output.status.code(),
        Some(expected),
        "exit status mismatch; stderr:\n{}",
        stderr(output)
    );
}

/// Generates a small dataset into `dir`, returning the two CSV paths.
fn generate(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let config = dir.join("gen.json");
    fs::write(&config, r#"{"n_customers": 300, "months": 15, "ntl_fraction": 0.3, "seed": 7}"#)
        .unwrap();
    let data = dir.join("data");
    let output = run(bin()
        .args(["gen", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&data));
    assert_exit(&output, 0);
    (data.join("consumption.csv"), data.join("inspections.csv"))
}

/// Rewrites the inspections file keeping only the first `keep` data rows, so
/// the remaining customers become scoring targets.
fn truncate_inspections(path: &Path, keep: usize) {
    let text = fs::read_to_string(path).unwrap();
    let kept: Vec<&str> = text.lines().take(1 + keep).collect();
    fs::write(path, kept.join("\n") + "\n").unwrap();
}

#[test]
fn gen_validate_features_round_trip() {
    let dir = TempDir::new().unwrap();
    let (readings, inspections) = generate(dir.path());

    let consumption = fs::read_to_string(&readings).unwrap();
    assert!(consumption.starts_with("customer_id,reading_date,kwh_increase,days_since_prev\n"));
    assert!(fs::read_to_string(&inspections)
        .unwrap()
        .starts_with("customer_id,inspection_date,label\n"));

    let output = run(bin()
        .args(["validate", "--readings"])
        .arg(&readings)
        .arg("--inspections")
        .arg(&inspections));
    assert_exit(&output, 0);

    let feat_dir = dir.path().join("feat");
    let output = run(bin()
        .args(["features", "--readings"])
        .arg(&readings)
        .arg("--inspections")
        .arg(&inspections)
        .arg("--out")
        .arg(&feat_dir));
    assert_exit(&output, 0);

    let features = fs::read_to_string(feat_dir.join("features.csv")).unwrap();
    let header = features.lines().next().unwrap();
    assert!(header.starts_with("customer_id,label,x_1,"));
    assert!(header.ends_with(",x_12"));
    // Every generated customer is inspected with 15 months of history, so
    // each contributes one labeled row.
    assert_eq!(features.lines().count(), 301);

    let attributes = fs::read_to_string(feat_dir.join("attributes.csv")).unwrap();
    assert!(attributes.lines().next().unwrap().starts_with("customer_id,label,"));
    assert_eq!(attributes.lines().count(), 301);
    assert!(feat_dir.join("exclusions.csv").exists());
}

#[test]
fn usage_problems_exit_one() {
    let output = run(bin().arg("frobnicate"));
    assert_exit(&output, 1);

    let output = run(bin().args(["sweep", "--config", "x.json", "--frobnicate"]));
    assert_exit(&output, 1);
    assert!(stderr(&output).contains("--frobnicate"));

    // Missing required --out.
    let output = run(bin().arg("gen"));
    assert_exit(&output, 1);

    let dir = TempDir::new().unwrap();
    let output = run(bin()
        .env("NTLBENCH_SEED", "not-a-number")
        .args(["gen", "--out"])
        .arg(dir.path().join("out")));
    assert_exit(&output, 1);
    assert!(stderr(&output).contains("NTLBENCH_SEED"));

    let output = run(bin().arg("--help"));
    assert_exit(&output, 0);
    assert!(String::from_utf8_lossy(&output.stdout).contains("Usage:"));
}

#[test]
fn rejected_data_exits_two() {
    let dir = TempDir::new().unwrap();
    let readings = dir.path().join("r.csv");
    let inspections = dir.path().join("i.csv");

    // Unparseable value: negative consumption is refused at load time.
    fs::write(
        &readings,
        "customer_id,reading_date,kwh_increase,days_since_prev\nC1,2020-01-01,-5.0,31\n",
    )
    .unwrap();
    fs::write(&inspections, "customer_id,inspection_date,label\nC1,2021-01-01,1\n").unwrap();
    let output = run(bin()
        .args(["validate", "--readings"])
        .arg(&readings)
        .arg("--inspections")
        .arg(&inspections));
    assert_exit(&output, 2);
    assert!(stderr(&output).contains("kwh_increase"));

    // Parseable rows whose invariants fail: every breach is listed.
    fs::write(
        &readings,
        "customer_id,reading_date,kwh_increase,days_since_prev\n\
         C1,2020-01-01,5.0,31\nC1,2020-01-15,6.0,14\n",
    )
    .unwrap();
    fs::write(&inspections, "customer_id,inspection_date,label\nC9,2021-01-01,1\n").unwrap();
    let output = run(bin()
        .args(["validate", "--readings"])
        .arg(&readings)
        .arg("--inspections")
        .arg(&inspections));
    assert_exit(&output, 2);
    let listing = stderr(&output);
    assert!(listing.contains("violation: customer C1"));
    assert!(listing.contains("violation: customer C9"));
}

#[test]
fn train_score_evaluate_chain() {
    let dir = TempDir::new().unwrap();
    let (readings, inspections) = generate(dir.path());
    truncate_inspections(&inspections, 220);

    let config = dir.path().join("train.json");
    fs::write(
        &config,
        format!(
            r#"{{
  "data": {{"source": "csv", "readings": {:?}, "inspections": {:?}}},
  "classifier": {{"kind": "svm", "config": {{"c": 1.0, "kernel": {{"type": "linear"}}, "epochs": 20, "seed": 3, "c_grid": [1.0]}}}},
  "folds": 2,
  "seed": 11
}}"#,
            readings, inspections
        ),
    )
    .unwrap();
    let trained = dir.path().join("trained");
    let output = run(bin()
        .args(["train", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&trained));
    assert_exit(&output, 0);

    let model = trained.join("model_linear_svm.json");
    assert!(model.exists());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(trained.join("train_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["classifier"], "linear_svm");
    assert_eq!(report["folds"].as_array().unwrap().len(), 2);
    assert!(report["test_metrics"]["auc"].is_number());

    let scored = dir.path().join("scored");
    let output = run(bin()
        .args(["score", "--readings"])
        .arg(&readings)
        .arg("--inspections")
        .arg(&inspections)
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&scored));
    assert_exit(&output, 0);
    let scores = fs::read_to_string(scored.join("scores.csv")).unwrap();
    let mut lines = scores.lines();
    assert_eq!(lines.next(), Some("customer_id,score,label"));
    let values: Vec<f64> = lines
        .map(|line| line.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    // One row per uninspected customer, ranked most suspicious first.
    assert_eq!(values.len(), 80);
    assert!(values.windows(2).all(|w| w[0] >= w[1]));

    let evaluated = dir.path().join("evaluated");
    let output = run(bin()
        .args(["evaluate", "--readings"])
        .arg(&readings)
        .arg("--inspections")
        .arg(&inspections)
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&evaluated));
    assert_exit(&output, 0);
    let evaluation: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(evaluated.join("evaluation.json")).unwrap())
            .unwrap();
    assert_eq!(evaluation["examples"], 220);
    assert!(evaluation["confusion"]["true_positives"].is_number());
    assert!(evaluation["metrics"]["accuracy"].is_number());

    // The rule-text model format goes through the same scoring path.
    let rules_config = dir.path().join("rules.json");
    fs::write(
        &rules_config,
        format!(
            r#"{{"data": {{"source": "csv", "readings": {:?}, "inspections": {:?}}}, "classifier": {{"kind": "boolean"}}, "folds": 2, "seed": 11}}"#,
            readings, inspections
        ),
    )
    .unwrap();
    let rules_out = dir.path().join("rules_trained");
    let output = run(bin()
        .args(["train", "--config"])
        .arg(&rules_config)
        .arg("--out")
        .arg(&rules_out));
    assert_exit(&output, 0);
    let output = run(bin()
        .args(["score", "--readings"])
        .arg(&readings)
        .arg("--inspections")
        .arg(&inspections)
        .arg("--model")
        .arg(rules_out.join("model_boolean.rules"))
        .arg("--out")
        .arg(dir.path().join("rules_scored")));
    assert_exit(&output, 0);
}

#[test]
fn sweep_writes_report_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("sweep.json");
    fs::write(
        &config,
        r#"{
  "data": {"source": "synthetic", "config": {"n_customers": 300, "months": 15, "ntl_fraction": 0.4, "base_consumption_range": [2.0, 30.0], "theft_drop_factor_range": [0.2, 0.6], "seasonality_amplitude": 0.15, "noise_sigma": 0.05, "seed": 5}},
  "classifiers": [{"kind": "boolean"}],
  "levels": [0.0, 0.3, 0.6],
  "target_size": 40,
  "folds": 2,
  "master_seed": 9
}"#,
    )
    .unwrap();

    let first = dir.path().join("run1");
    let output = run(bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&first)
        .args(["--jobs", "2"]));
    assert_exit(&output, 0);
    assert!(first.join("report.json").exists());
    let curves = fs::read_to_string(first.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().next(), Some("level,classifier,auc,tnr,fpr,fnr,tpr"));
    // One evaluated row per level; the 0% row has no positives, so recall,
    // its complement, and the combined area are all blank.
    assert_eq!(curves.lines().count(), 4);
    let zero_row = curves.lines().find(|l| l.starts_with("0,")).unwrap();
    assert!(zero_row.ends_with(",,"));
    assert!(first.join("model_boolean.rules").exists());

    let second = dir.path().join("run2");
    let output = run(bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&second)
        .args(["--jobs", "1"]));
    assert_exit(&output, 0);
    assert_eq!(curves, fs::read_to_string(second.join("curves.csv")).unwrap());

    let scrub = |path: &Path| -> serde_json::Value {
        fn zero_runtime(value: &mut serde_json::Value) {
            match value {
                serde_json::Value::Object(map) => {
                    if let Some(runtime) = map.get_mut("runtime_seconds") {
                        *runtime = serde_json::Value::from(0.0);
                    }
                    map.values_mut().for_each(zero_runtime);
                }
                serde_json::Value::Array(items) => items.iter_mut().for_each(zero_runtime),
                _ => {}
            }
        }
        let mut value: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        zero_runtime(&mut value);
        value
    };
    assert_eq!(scrub(&first.join("report.json")), scrub(&second.join("report.json")));

    // The experiment config echoed into the report names every level.
    let report = scrub(&first.join("report.json"));
    assert_eq!(report["config"]["levels"].as_array().unwrap().len(), 3);
}

#[test]
fn seed_precedence_flag_env_config() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("gen.json");
    fs::write(&config, r#"{"n_customers": 50, "months": 14, "seed": 1}"#).unwrap();
    let consumption = |name: &str| dir.path().join(name).join("consumption.csv");

    let run_gen = |name: &str, seed_flag: Option<&str>, env: Option<&str>| {
        let mut cmd = bin();
        cmd.args(["gen", "--config"]).arg(&config).arg("--out").arg(dir.path().join(name));
        if let Some(seed) = seed_flag {
            cmd.args(["--seed", seed]);
        }
        if let Some(value) = env {
            cmd.env("NTLBENCH_SEED", value);
        }
        assert_exit(&run(&mut cmd), 0);
    };

    run_gen("config_seed", None, None);
    run_gen("flag_seed", Some("2"), None);
    run_gen("env_seed", None, Some("2"));
    run_gen("flag_beats_env", Some("2"), Some("3"));

    let base = fs::read_to_string(consumption("config_seed")).unwrap();
    let flag = fs::read_to_string(consumption("flag_seed")).unwrap();
    let env = fs::read_to_string(consumption("env_seed")).unwrap();
    let both = fs::read_to_string(consumption("flag_beats_env")).unwrap();
    assert_ne!(base, flag, "an explicit seed must change the draw");
    assert_eq!(flag, env, "the env fallback must match the equivalent flag");
    assert_eq!(flag, both, "--seed outranks NTLBENCH_SEED");
}
