use std::process::Command;

use solnft_harness::output::{ENSEMBLE_FILE, MANIFEST_FILE, SUMMARY_FILE};
use solnft_harness::scenarios::SCENARIO_NAMES;
use solnft_harness::ScenarioConfig;

fn solnft(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_solnft")).args(args).output().unwrap()
}

#[test]
fn lists_scenarios() {
    let out = solnft(&["list-scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().collect::<Vec<_>>(), SCENARIO_NAMES);
}

#[test]
fn printed_config_runs_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = solnft(&["scenario", "first-order-independent", "--pulses", "2", "--print-config"]);
    assert!(out.status.success());
    let mut cfg = ScenarioConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.n_pulses, 2);
    cfg.checkpoint_spans = vec![8];
    let results = dir.path().join("results");
    cfg.output_dir = results.display().to_string();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();

    let out = solnft(&["run", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [ENSEMBLE_FILE, SUMMARY_FILE, MANIFEST_FILE] {
        assert!(results.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(results.join(ENSEMBLE_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
}

#[test]
fn unknown_scenario_fails() {
    let out = solnft(&["scenario", "no-such-thing"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-thing"));
}
