use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
    "params": {"alpha": 1.0, "beta": 1.0, "b": 1.0},
    "mix0_assumed": {"atoms": [[1.0, 0.5], [2.0, 0.5]]},
    "mix0_true": {"atoms": [[1.0, 0.75], [2.0, 0.25]]},
    "horizon": 12,
    "n_trajectories": 3,
    "p": 0.3,
    "grid_nodes": 128,
    "seed": 5
}"#;

fn gfilter(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfilter"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--output-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn every_subcommand_succeeds_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let cases: [(&str, &[&str]); 6] = [
        ("simulate", &["trajectory_0000.csv", "trajectory_0002.csv"]),
        ("filter", &["filter.csv", "posterior_final.csv", "grid_final.csv"]),
        ("stability", &["stability.csv", "stability_summary.json"]),
        ("lp", &["lp.csv", "lp_summary.json"]),
        ("validate", &["validate.csv", "validate_summary.json"]),
        ("constants", &["constants.json"]),
    ];
    for (cmd, files) in cases {
        let result = gfilter(&[cmd, "--threads", "2"], &config, &out);
        assert_eq!(result.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&result.stderr));
        for f in files {
            assert!(out.join(f).is_file(), "{cmd} did not write {f}");
        }
    }
    let text = std::fs::read_to_string(out.join("stability_summary.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(summary["generated_at_unix"].is_u64());
    assert!(text.find("generated_at_unix").unwrap() < text.find("\"config\"").unwrap());
}

#[test]
fn filter_accepts_an_external_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let traj = dir.path().join("t.csv");
    std::fs::write(&traj, "step,x,y\n0,1.0,\n1,0.5,2.0\n2,0.3,1.5\n").unwrap();
    let out = dir.path().join("out");
    let result = gfilter(&["filter", "--trajectory", traj.to_str().unwrap()], &config, &out);
    assert_eq!(result.status.code(), Some(0));
    let text = String::from_utf8(result.stdout).unwrap();
    assert!(text.contains("filtered 2 observations"));
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let unknown = write_config(dir.path(), &CONFIG.replace("\"seed\"", "\"sede\""));
    let result = gfilter(&["stability"], &unknown, &out);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("sede"));

    let bad_weights = write_config(dir.path(), &CONFIG.replace("[2.0, 0.25]", "[2.0, 0.5]"));
    assert_eq!(gfilter(&["simulate"], &bad_weights, &out).status.code(), Some(2));

    let config = write_config(dir.path(), CONFIG);
    assert_eq!(gfilter(&["lp", "--threads", "0"], &config, &out).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_ne!(gfilter(&["constants"], &missing, &out).status.code(), Some(0));
}

#[test]
fn bad_trajectory_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let traj = dir.path().join("t.csv");
    std::fs::write(&traj, "step,x,y\n0,1.0,\n1,0.5,-2.0\n").unwrap();
    let result = gfilter(&["filter", "--trajectory", traj.to_str().unwrap()], &config, &dir.path().join("out"));
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let long = CONFIG
        .replace("\"horizon\": 12", "\"horizon\": 1500")
        .replace("\"n_trajectories\": 3", "\"n_trajectories\": 1");
    let config = write_config(dir.path(), &long);
    let result = gfilter(&["stability"], &config, &dir.path().join("out"));
    assert_eq!(result.status.code(), Some(3), "{}", String::from_utf8_lossy(&result.stderr));
}

#[test]
fn usage_errors_exit_with_two() {
    let result = Command::new(env!("CARGO_BIN_EXE_gfilter")).arg("stability").output().unwrap();
    assert_eq!(result.status.code(), Some(2));
}
