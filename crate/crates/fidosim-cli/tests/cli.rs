//! CLI contract: flags, exit codes (0 match / 2 mismatch / 1 error), config
//! overlays, and transcript file handling.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fidosim")
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("fidosim-cli-{}-{name}", std::process::id()))
}

#[test]
fn run_exits_zero_on_expected_verdict() {
    let output = Command::new(bin())
        .args([
            "run",
            "--scenario",
            "authenticator_deception",
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("verdict=attacker_session_as_victim"));
    assert!(stdout.contains("match=true"));
}

#[test]
fn run_exits_two_on_verdict_mismatch() {
    let output = Command::new(bin())
        .args([
            "run",
            "--scenario",
            "baseline",
            "--expect",
            "attacker_session_as_victim",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8(output.stdout)
        .unwrap()
        .contains("match=false"));
}

#[test]
fn unknown_scenario_exits_one() {
    let output = Command::new(bin())
        .args(["run", "--scenario", "no_such"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8(output.stderr)
        .unwrap()
        .contains("unknown scenario"));
}

#[test]
fn ablation_config_with_declared_expectation_exits_zero() {
    let config = temp_path("ablation.json");
    std::fs::write(
        &config,
        r#"{
  "scenario": "authenticator_deception",
  "toggles": {"install_rogue_ca": false},
  "expect": "blocked(tls_untrusted)"
}"#,
    )
    .unwrap();
    let output = Command::new(bin())
        .args(["run", "--scenario", "authenticator_deception", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    assert!(String::from_utf8(output.stdout)
        .unwrap()
        .contains("verdict=blocked(tls_untrusted)"));
}

#[test]
fn unknown_toggle_in_config_exits_one() {
    let config = temp_path("bad-toggle.json");
    std::fs::write(&config, r#"{"toggles": {"spooky_mode": true}}"#).unwrap();
    let output = Command::new(bin())
        .args(["run", "--scenario", "baseline", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn config_scenario_mismatch_exits_one() {
    let config = temp_path("mismatch.json");
    std::fs::write(&config, r#"{"scenario": "baseline"}"#).unwrap();
    let output = Command::new(bin())
        .args(["run", "--scenario", "passkey_reduction", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn replay_matches_run_verdict_for_every_scenario() {
    let dir = temp_path("replay-dir");
    std::fs::create_dir_all(&dir).unwrap();
    let output = Command::new(bin())
        .args(["run", "--all", "--seed", "5", "--out-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    for line in stdout.lines() {
        let scenario = line
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix("scenario="))
            .unwrap();
        let verdict = line
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix("verdict="))
            .unwrap();
        let replayed = Command::new(bin())
            .args(["replay", "--transcript"])
            .arg(dir.join(format!("{scenario}.ndjson")))
            .output()
            .unwrap();
        assert_eq!(replayed.status.code(), Some(0));
        assert_eq!(
            String::from_utf8(replayed.stdout).unwrap().trim(),
            verdict,
            "replay disagrees for {scenario}"
        );
    }
}

#[test]
fn replay_of_truncated_transcript_exits_one() {
    let path = temp_path("truncated.ndjson");
    let full = temp_path("full.ndjson");
    let status = Command::new(bin())
        .args(["run", "--scenario", "baseline", "--transcript"])
        .arg(&full)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&full).unwrap();
    std::fs::write(&path, &text[..text.len() - 10]).unwrap();
    let output = Command::new(bin())
        .args(["replay", "--transcript"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8(output.stderr)
        .unwrap()
        .contains("parse error"));
}

#[test]
fn summarize_with_no_input_exits_one() {
    let output = Command::new(bin()).arg("summarize").output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn summarize_renders_ablation_column() {
    let config = temp_path("summ-ablation.json");
    std::fs::write(
        &config,
        r#"{"toggles": {"flush_cache": false}, "expect": "blocked(victim_reached_genuine_rp)"}"#,
    )
    .unwrap();
    let transcript = temp_path("summ-ablation.ndjson");
    let status = Command::new(bin())
        .args(["run", "--scenario", "authenticator_deception", "--config"])
        .arg(&config)
        .arg("--transcript")
        .arg(&transcript)
        .status()
        .unwrap();
    assert!(status.success());
    let output = Command::new(bin())
        .arg("summarize")
        .arg(&transcript)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("flush_cache=false"), "{text}");
    assert!(text.contains("blocked(victim_reached_genuine_rp)"));
}

#[test]
fn transcript_files_end_with_newline_per_record() {
    let path = temp_path("ndjson-shape.ndjson");
    let status = Command::new(bin())
        .args(["run", "--scenario", "baseline", "--transcript"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.ends_with('\n'));
    for line in text.lines() {
        let value: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(value.get("seq").is_some());
        // Canonical form: re-serializing the parsed value must reproduce the
        // line exactly (serde_json maps are ordered).
        assert_eq!(value.to_string(), line);
    }
}
