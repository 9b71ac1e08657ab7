//! Black-box checks of the command-line surface.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_srp-lab"))
}

#[test]
fn missing_command_is_a_usage_error() {
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn unknown_prng_names_the_registry() {
    let out = bin()
        .args(["simulate", "--trials", "1", "--prng", "nosuch"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spn16"));
}

#[test]
fn csv_is_limited_to_game_commands() {
    let out = bin()
        .args(["simulate", "--trials", "1", "--format", "csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn game_csv_has_the_declared_header() {
    let out = bin()
        .args(["game-untraceability", "--seed", "3", "--trials", "50", "--format", "csv"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let body = String::from_utf8(out.stdout).unwrap();
    assert!(body.starts_with("game,trials,wins,win_rate,advantage,ci95,seed\n"));
    assert!(body.contains("untraceability,50,"));
    assert!(body.contains("untraceability-baseline,50,"));
}

#[test]
fn seed_env_var_is_a_default_and_the_flag_wins() {
    let from_env = bin()
        .args(["attack-impersonate-tag", "--trials", "10"])
        .env("RFID_LAB_SEED", "99")
        .output()
        .unwrap();
    let from_flag = bin()
        .args(["attack-impersonate-tag", "--trials", "10", "--seed", "99"])
        .output()
        .unwrap();
    let overridden = bin()
        .args(["attack-impersonate-tag", "--trials", "10", "--seed", "7"])
        .env("RFID_LAB_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(from_env.stdout, from_flag.stdout);
    let body = String::from_utf8(overridden.stdout).unwrap();
    assert!(body.contains("\"seed\": 7"));
}

#[test]
fn report_embeds_the_resolved_config_and_version() {
    let out = bin()
        .args(["simulate", "--seed", "2", "--trials", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["version"], "v1");
    assert_eq!(v["config"]["command"], "simulate");
    assert_eq!(v["config"]["seed"], 2);
    assert_eq!(v["config"]["prng"], "spn16");
    assert_eq!(v["result"]["sync_failures"], 0);
}

#[test]
fn verbose_simulate_embeds_a_hex_transcript() {
    let out = bin()
        .args(["simulate", "--seed", "2", "--trials", "1", "--verbose"])
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let entries = v["result"]["example_transcript"]["entries"].as_array().unwrap();
    assert_eq!(entries[0]["step"], 1);
    let n_r = entries[0]["payload"]["n_r"].as_str().unwrap();
    assert_eq!(n_r.len(), 4);
}

#[test]
fn attack_scenarios_report_their_findings() {
    let out = bin()
        .args(["attack-impersonate-reader", "--seed", "4", "--trials", "25"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["forged_m2_accepted"], 25);
    assert_eq!(v["result"]["permanent_desyncs"], 25);
}

#[test]
fn regen_golden_reproduces_the_checked_in_file() {
    let path = std::env::temp_dir().join("srp-lab-regen-golden.csv");
    let out = bin()
        .args(["regen-golden", "--output"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let generated = std::fs::read_to_string(&path).unwrap();
    let checked_in = include_str!("../../core/tests/data/prng_golden.csv");
    assert_eq!(generated, checked_in);
}
