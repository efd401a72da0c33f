// End-to-end checks that drive the compiled binary the way a user would:
// config files on disk, subcommands, exit codes, and the files left behind.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn uplift() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_uplift"));
    // Tests must not inherit ambient settings from the invoking shell.
    cmd.env_remove("UPLIFT_SEED");
    cmd.env_remove("UPLIFT_THREADS");
    cmd
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A small synthetic-source config: fast to fit, deterministic, no input files.
fn synthetic_config(dir: &Path, out_dir: &str) -> std::path::PathBuf {
    let text = format!(
        r#"
[data]
source = "synthetic"
mode = "revenue"

[data.synthetic]
n = 600
p = 3
arm_probs = [0.5, 0.5]
noise_sd = 0.5
purchase_sparsity = 0.0
seed = 3

[data.synthetic.baseline]
kind = "zero"

[[data.synthetic.effects]]
kind = "constant"
value = 1.0

[model]
causal_trees = 8
nuisance_trees = 8
min_node_size = 10
seed = 5

[evaluation]
partitions = 2

[output]
dir = "{out_dir}"
"#
    );
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

// ==================================================================
// prepare
// ==================================================================

#[test]
fn prepare_writes_canonical_data_and_prints_an_audit() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = synthetic_config(dir.path(), out_dir.to_str().unwrap());

    let out = uplift().arg("prepare").arg("--config").arg(&config).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let text = stdout(&out);
    assert!(text.contains("revenue reading"), "missing section header: {text}");
    assert!(text.contains("units: 600"), "missing unit count: {text}");
    assert!(text.contains("covariates: 3"), "missing covariate count: {text}");

    let canonical = out_dir.join("canonical_revenue.csv");
    let schema = out_dir.join("schema_revenue.json");
    assert!(canonical.exists());
    assert!(schema.exists());

    let header = fs::read_to_string(&canonical).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "unit_id,x1,x2,x3,treatment,outcome");

    // The emitted schema must load the canonical file back without edits.
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&schema).unwrap()).unwrap();
    assert_eq!(parsed["treatment"], "treatment");
    assert_eq!(parsed["outcome"], "outcome");
    assert_eq!(parsed["outcome_kind"], "revenue");
}

#[test]
fn prepare_write_demo_generates_a_campaign_file() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo.csv");

    let out = uplift().arg("prepare").arg("--write-demo").arg(&demo).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("units: 64000"));

    let text = fs::read_to_string(&demo).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.contains("segment"));
    assert!(header.contains("spend"));
    assert_eq!(lines.count(), 64_000);
}

// ==================================================================
// train + score
// ==================================================================

#[test]
fn train_then_score_round_trips_through_the_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = synthetic_config(dir.path(), out_dir.to_str().unwrap());

    let out = uplift().arg("train").arg("--config").arg(&config).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("arm 1 \"arm1\""), "stdout: {}", stdout(&out));

    let model_path = out_dir.join("model_revenue.json");
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&model_path).unwrap()).unwrap();
    assert_eq!(model["format_version"], 1);
    assert_eq!(model["model"]["control_name"], "control");

    // Score a hand-written covariate file against the saved model.
    let input = dir.path().join("to_score.csv");
    fs::write(&input, "unit_id,x1,x2,x3\n10,0.5,-0.2,0.1\n11,-0.7,0.3,0.9\n").unwrap();
    let score_dir = dir.path().join("scored");
    let out = uplift()
        .arg("score")
        .arg("--model")
        .arg(&model_path)
        .arg("--input")
        .arg(&input)
        .arg("--out")
        .arg(&score_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let scores = fs::read_to_string(score_dir.join("scores.csv")).unwrap();
    let mut lines = scores.lines();
    assert_eq!(lines.next().unwrap(), "unit_id,tau_arm1,recommended");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 3);
        fields[1].parse::<f64>().unwrap();
        assert!(fields[2] == "arm1" || fields[2] == "control", "row: {row}");
    }
}

#[test]
fn score_accepts_an_input_without_unit_ids() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = synthetic_config(dir.path(), out_dir.to_str().unwrap());
    assert!(uplift().arg("train").arg("--config").arg(&config).output().unwrap().status.success());

    let input = dir.path().join("bare.csv");
    fs::write(&input, "x1,x2,x3\n0.5,-0.2,0.1\n").unwrap();
    let score_dir = dir.path().join("scored");
    let out = uplift()
        .arg("score")
        .arg("--model")
        .arg(out_dir.join("model_revenue.json"))
        .arg("--input")
        .arg(&input)
        .arg("--out")
        .arg(&score_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let scores = fs::read_to_string(score_dir.join("scores.csv")).unwrap();
    // Row numbers stand in for the missing ids.
    assert!(scores.lines().nth(1).unwrap().starts_with("0,"), "{scores}");
}

// ==================================================================
// run
// ==================================================================

#[test]
fn run_emits_report_manifest_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = synthetic_config(dir.path(), out_dir.to_str().unwrap());

    let out = uplift().arg("run").arg("--config").arg(&config).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["metadata"]["scheme"], "treatment_comparison");
    assert!(report["arms"].as_array().unwrap().len() == 1);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    let sha = manifest["config_sha256"].as_str().unwrap();
    assert_eq!(sha.len(), 64);
    assert!(sha.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(manifest["resolved"]["seed"], 5);
    assert_eq!(manifest["resolved"]["partitions"], 2);

    assert!(out_dir.join("table1_revenue_arm1_p1.csv").exists());
    assert!(out_dir.join("table1_revenue_arm1_p2.csv").exists());
    assert!(out_dir.join("table2.csv").exists());
    assert!(out_dir.join("importance_revenue_arm1.csv").exists());
    assert!(out_dir.join("ite_hist_revenue_arm1.csv").exists());

    let table1 = fs::read_to_string(out_dir.join("table1_revenue_arm1_p1.csv")).unwrap();
    let header = table1.lines().next().unwrap();
    assert!(header.starts_with("decile,records_t,records_c"), "{header}");
    assert_eq!(table1.lines().count(), 11);
}

#[test]
fn seed_precedence_is_config_then_env_then_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = synthetic_config(dir.path(), out_dir.to_str().unwrap());

    let manifest_seed = |out_dir: &Path| -> i64 {
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap())
                .unwrap();
        manifest["resolved"]["seed"].as_i64().unwrap()
    };

    let env_dir = dir.path().join("out-env");
    let out = uplift()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&env_dir)
        .env("UPLIFT_SEED", "77")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert_eq!(manifest_seed(&env_dir), 77);

    let flag_dir = dir.path().join("out-flag");
    let out = uplift()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&flag_dir)
        .arg("--seed")
        .arg("99")
        .env("UPLIFT_SEED", "77")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert_eq!(manifest_seed(&flag_dir), 99);
}

// ==================================================================
// failure modes and exit codes
// ==================================================================

#[test]
fn unknown_config_keys_are_rejected_with_the_usage_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "nonsense = true\n").unwrap();

    let out = uplift().arg("run").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nonsense"), "stderr: {}", stderr(&out));
}

#[test]
fn csv_source_without_a_path_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    fs::write(
        &config,
        "[data]\nsource = \"csv\"\n\n[data.schema]\ntreatment = \"t\"\noutcome = \"y\"\ncontrol_label = \"control\"\n",
    )
    .unwrap();

    let out = uplift().arg("run").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_seed_env_var_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = synthetic_config(dir.path(), out_dir.to_str().unwrap());

    let out = uplift()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .env("UPLIFT_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("UPLIFT_SEED"), "stderr: {}", stderr(&out));
}

#[test]
fn scoring_with_mismatched_covariates_is_a_compatibility_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = synthetic_config(dir.path(), out_dir.to_str().unwrap());
    assert!(uplift().arg("train").arg("--config").arg(&config).output().unwrap().status.success());

    let input = dir.path().join("wrong.csv");
    fs::write(&input, "x1,x2,wrong\n0.1,0.2,0.3\n").unwrap();
    let out = uplift()
        .arg("score")
        .arg("--model")
        .arg(out_dir.join("model_revenue.json"))
        .arg("--input")
        .arg(&input)
        .arg("--out")
        .arg(dir.path().join("scored"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("covariate"), "stderr: {}", stderr(&out));
}

#[test]
fn scoring_with_a_newer_model_format_is_a_compatibility_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = synthetic_config(dir.path(), out_dir.to_str().unwrap());
    assert!(uplift().arg("train").arg("--config").arg(&config).output().unwrap().status.success());

    let model_path = out_dir.join("model_revenue.json");
    let mut model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&model_path).unwrap()).unwrap();
    model["format_version"] = serde_json::json!(999);
    fs::write(&model_path, serde_json::to_string(&model).unwrap()).unwrap();

    let input = dir.path().join("input.csv");
    fs::write(&input, "x1,x2,x3\n0.1,0.2,0.3\n").unwrap();
    let out = uplift()
        .arg("score")
        .arg("--model")
        .arg(&model_path)
        .arg("--input")
        .arg(&input)
        .arg("--out")
        .arg(dir.path().join("scored"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn non_numeric_covariate_cells_are_reported_with_their_position() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = synthetic_config(dir.path(), out_dir.to_str().unwrap());
    assert!(uplift().arg("train").arg("--config").arg(&config).output().unwrap().status.success());

    let input = dir.path().join("input.csv");
    fs::write(&input, "x1,x2,x3\n0.1,oops,0.3\n").unwrap();
    let out = uplift()
        .arg("score")
        .arg("--model")
        .arg(out_dir.join("model_revenue.json"))
        .arg("--input")
        .arg(&input)
        .arg("--out")
        .arg(dir.path().join("scored"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("x2"), "stderr: {}", stderr(&out));
}
