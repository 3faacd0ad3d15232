//! End-to-end scenario behavior: default configs reach their expected
//! verdicts, ablations fail where the model says they must, and transcripts
//! hold up under the validators.

use fidosim_core::scenario::{
    self, block_reason, default_config, derive_verdict, expected_verdict, run_scenario,
    scenario_names, InfectionSetting, Verdict,
};
use fidosim_core::transcript::Transcript;

fn run_default(name: &str) -> fidosim_core::ScenarioOutcome {
    let config = default_config(name).unwrap();
    run_scenario(name, &config).unwrap()
}

#[test]
fn every_scenario_reaches_its_expected_verdict() {
    for name in scenario_names() {
        let outcome = run_default(name);
        assert_eq!(
            outcome.verdict,
            expected_verdict(name).unwrap(),
            "scenario {name}"
        );
    }
}

#[test]
fn unknown_scenario_is_an_error() {
    assert!(run_scenario("no_such", &default_config("baseline").unwrap()).is_err());
    assert!(default_config("no_such").is_err());
}

#[test]
fn baseline_emits_fig1_steps_in_order() {
    let outcome = run_default("baseline");
    let labels: Vec<String> = outcome
        .transcript
        .find_all("fig1.step")
        .filter_map(|e| e.step_label.clone())
        .collect();
    assert_eq!(labels, vec!["0", "1", "2", "3", "4", "5", "6"]);
}

#[test]
fn baseline_with_wrong_pin_blocks_not_unlocked() {
    let mut config = default_config("baseline").unwrap();
    config.victim_policy.enters_wrong_pin = true;
    let outcome = run_scenario("baseline", &config).unwrap();
    assert_eq!(outcome.verdict, Verdict::blocked("not_unlocked"));
}

#[test]
fn baseline_with_declining_victim_blocks_user_declined() {
    let mut config = default_config("baseline").unwrap();
    config.victim_policy.approves_authenticator_prompts = false;
    let outcome = run_scenario("baseline", &config).unwrap();
    assert_eq!(outcome.verdict, Verdict::blocked("user_declined"));
}

#[test]
fn deception_emits_fig2_steps_in_order() {
    let outcome = run_default("authenticator_deception");
    assert_eq!(outcome.verdict, Verdict::AttackerSessionAsVictim);
    let labels: Vec<String> = outcome
        .transcript
        .find_all("fig2.step")
        .filter_map(|e| e.step_label.clone())
        .collect();
    assert_eq!(labels, vec!["1", "2", "3", "4", "5", "6", "7"]);
}

#[test]
fn deception_cleanup_returns_victim_to_genuine_rp() {
    let outcome = run_default("authenticator_deception");
    let cleanup = outcome
        .transcript
        .find_all("attack.cleanup")
        .next()
        .expect("cleanup event");
    assert_eq!(
        cleanup.payload.get("reached_genuine"),
        Some(&serde_json::Value::Bool(true))
    );
}

#[test]
fn deception_single_toggle_ablations_block_as_predicted() {
    let cases = [
        ("victim_compromised", "privilege_error"),
        ("install_rogue_ca", "tls_untrusted"),
        ("dns_override", block_reason::VICTIM_REACHED_GENUINE_RP),
        ("route_override", block_reason::VICTIM_REACHED_GENUINE_RP),
        ("flush_cache", block_reason::VICTIM_REACHED_GENUINE_RP),
    ];
    for (toggle, expected_reason) in cases {
        let mut config = default_config("authenticator_deception").unwrap();
        match toggle {
            "victim_compromised" => config.toggles.victim_compromised = false,
            "install_rogue_ca" => config.toggles.install_rogue_ca = false,
            "dns_override" => config.toggles.dns_override = false,
            "route_override" => config.toggles.route_override = false,
            "flush_cache" => config.toggles.flush_cache = false,
            _ => unreachable!(),
        }
        let outcome = run_scenario("authenticator_deception", &config).unwrap();
        assert_eq!(
            outcome.verdict,
            Verdict::blocked(expected_reason),
            "ablation {toggle}"
        );
    }
}

#[test]
fn deception_blocked_by_anti_arp_spoofing() {
    let mut config = default_config("authenticator_deception").unwrap();
    config.toggles.anti_arp_spoofing = true;
    let outcome = run_scenario("authenticator_deception", &config).unwrap();
    assert_eq!(outcome.verdict, Verdict::blocked("position_required"));
}

#[test]
fn deception_blocked_when_victim_declines_prompt() {
    let mut config = default_config("authenticator_deception").unwrap();
    config.victim_policy.approves_authenticator_prompts = false;
    let outcome = run_scenario("authenticator_deception", &config).unwrap();
    assert_eq!(outcome.verdict, Verdict::blocked("user_declined"));
}

#[test]
fn infected_fixed_mode_records_duplicate_credential_id() {
    let outcome = run_default("infected_authenticator");
    assert_eq!(outcome.verdict, Verdict::AttackerSessionAsVictim);
    let note = outcome
        .transcript
        .find_all("attack.note")
        .next()
        .expect("second registration note");
    assert_eq!(
        note.payload
            .get("second_registration")
            .and_then(|v| v.as_str()),
        Some("duplicate_credential_id")
    );
}

#[test]
fn infected_indexed_mode_also_wins_without_duplicate_limit() {
    let mut config = default_config("infected_authenticator").unwrap();
    config.toggles.infection_mode = InfectionSetting::Indexed;
    let outcome = run_scenario("infected_authenticator", &config).unwrap();
    assert_eq!(outcome.verdict, Verdict::AttackerSessionAsVictim);
    assert!(outcome.transcript.find_all("attack.note").next().is_none());
}

#[test]
fn infected_ablation_honest_authenticator_blocks() {
    // Infection payload never installed: the attacker's derived credential id
    // matches nothing at the RP.
    let mut config = default_config("infected_authenticator").unwrap();
    config.toggles.infection_mode = InfectionSetting::None;
    let outcome = run_scenario("infected_authenticator", &config).unwrap();
    assert_eq!(outcome.verdict, Verdict::blocked("unknown_credential"));

    // Same if the binary was built but never deployed (no compromise).
    let mut config = default_config("infected_authenticator").unwrap();
    config.toggles.victim_compromised = false;
    let outcome = run_scenario("infected_authenticator", &config).unwrap();
    assert_eq!(outcome.verdict, Verdict::blocked("unknown_credential"));
}

#[test]
fn reduction_captures_password_and_no_passkey_material() {
    let outcome = run_default("passkey_reduction");
    assert_eq!(outcome.verdict, Verdict::PasswordCaptured);
    // The capture log must contain the password and exactly zero passkey
    // material; the transcript-wide scan runs in the acceptance suite.
    let captured = outcome
        .transcript
        .find_all("attacker.password_captured")
        .next()
        .expect("password capture event");
    assert_eq!(
        captured.payload.get("user").and_then(|v| v.as_str()),
        Some("alice")
    );
}

#[test]
fn reduction_blocked_by_cautious_policy() {
    let mut config = default_config("passkey_reduction").unwrap();
    config.victim_policy.falls_back_to_password = false;
    let outcome = run_scenario("passkey_reduction", &config).unwrap();
    assert_eq!(
        outcome.verdict,
        Verdict::blocked(block_reason::USER_DECLINED)
    );

    let mut config = default_config("passkey_reduction").unwrap();
    config.victim_policy.follows_phishing_links = false;
    let outcome = run_scenario("passkey_reduction", &config).unwrap();
    assert_eq!(
        outcome.verdict,
        Verdict::blocked(block_reason::USER_DECLINED)
    );
}

#[test]
fn reduction_blocked_when_rp_is_passkey_only() {
    let mut config = default_config("passkey_reduction").unwrap();
    config.toggles.password_fallback_enabled = false;
    let outcome = run_scenario("passkey_reduction", &config).unwrap();
    assert_eq!(
        outcome.verdict,
        Verdict::blocked(block_reason::PASSWORD_FALLBACK_DISABLED)
    );
}

#[test]
fn rogue_key_variant_a_locks_victim_out() {
    let outcome = run_default("rogue_key_registration");
    assert_eq!(outcome.verdict, Verdict::AttackerCredentialOnVictimAccount);
    let note = outcome
        .transcript
        .find_all("attack.note")
        .next()
        .expect("victim lockout note");
    assert_eq!(
        note.payload
            .get("victim_login_after_swap")
            .and_then(|v| v.as_str()),
        Some("invalid_signature")
    );
    // The attacker's own later session also shows up in the transcript.
    let attacker_session = outcome.transcript.find_all("rp.finish_auth").any(|e| {
        e.payload.get("result").and_then(|v| v.as_str()) == Some("ok")
            && e.payload.get("requester_host").and_then(|v| v.as_str()) == Some("attacker")
    });
    assert!(attacker_session);
}

#[test]
fn rogue_key_variant_b_survives_password_change() {
    let mut config = default_config("rogue_key_registration").unwrap();
    config.toggles.victim_compromised = false;
    config.victim_policy.follows_phishing_links = true;
    config.victim_policy.falls_back_to_password = true;
    let outcome = run_scenario("rogue_key_registration", &config).unwrap();
    assert_eq!(outcome.verdict, Verdict::AttackerCredentialOnVictimAccount);

    // Attacker session event appears after the password change event.
    let events = outcome.transcript.events();
    let change_seq = events
        .iter()
        .find(|e| e.kind == "rp.password_changed")
        .map(|e| e.seq)
        .expect("password change");
    let login_after = events.iter().any(|e| {
        e.kind == "rp.finish_auth"
            && e.seq > change_seq
            && e.payload.get("result").and_then(|v| v.as_str()) == Some("ok")
            && e.payload.get("requester_host").and_then(|v| v.as_str()) == Some("attacker")
            && e.payload.get("user").and_then(|v| v.as_str()) == Some("alice")
    });
    assert!(login_after, "attacker credential must outlive the password");
}

#[test]
fn rogue_key_without_position_blocks_but_registration_stays_honest() {
    let mut config = default_config("rogue_key_registration").unwrap();
    config.toggles.victim_compromised = false;
    // No password path either: variant (a) is attempted and fails.
    config.toggles.password_fallback_enabled = false;
    let outcome = run_scenario("rogue_key_registration", &config).unwrap();
    assert_eq!(outcome.verdict, Verdict::blocked("position_required"));
    // The victim's own registration still completed, untampered.
    let honest_reg = outcome.transcript.find_all("rp.finish_reg").any(|e| {
        e.payload.get("result").and_then(|v| v.as_str()) == Some("ok")
            && e.payload.get("requester_host").and_then(|v| v.as_str()) == Some("victim")
    });
    assert!(honest_reg);
}

#[test]
fn impersonation_full_variant_captures_info_without_any_rp_session() {
    let outcome = run_default("rp_impersonation");
    assert_eq!(outcome.verdict, Verdict::InformationCaptured);
    // The genuine RP never issued anything: no successful rp.finish_auth or
    // rp.password_login events at all.
    let any_session = outcome.transcript.events().iter().any(|e| {
        (e.kind == "rp.finish_auth" || e.kind == "rp.password_login")
            && e.payload.get("result").and_then(|v| v.as_str()) == Some("ok")
    });
    assert!(!any_session, "visual deception must not touch the real RP");
}

#[test]
fn impersonation_degraded_variant_needs_no_fido_at_all() {
    let mut config = default_config("rp_impersonation").unwrap();
    config.toggles = Default::default();
    config.victim_policy.follows_phishing_links = true;
    let outcome = run_scenario("rp_impersonation", &config).unwrap();
    assert_eq!(outcome.verdict, Verdict::InformationCaptured);
    let skipped = outcome
        .transcript
        .find_all("attacker.frontend")
        .any(|e| e.payload.get("action").and_then(|v| v.as_str()) == Some("skip_passkey_ui"));
    assert!(skipped);
}

#[test]
fn impersonation_full_variant_blocked_without_compromise() {
    let mut config = default_config("rp_impersonation").unwrap();
    config.toggles.victim_compromised = false;
    let outcome = run_scenario("rp_impersonation", &config).unwrap();
    assert_eq!(outcome.verdict, Verdict::blocked("tls_untrusted"));
}

#[test]
fn relay_wins_in_range_and_blocks_out_of_range() {
    let outcome = run_default("bluetooth_qr_relay");
    assert_eq!(outcome.verdict, Verdict::AttackerSessionAsVictim);

    let mut config = default_config("bluetooth_qr_relay").unwrap();
    config.toggles.proximity = false;
    let outcome = run_scenario("bluetooth_qr_relay", &config).unwrap();
    assert_eq!(outcome.verdict, Verdict::blocked("position_required"));

    let mut config = default_config("bluetooth_qr_relay").unwrap();
    config.victim_policy.approves_authenticator_prompts = false;
    let outcome = run_scenario("bluetooth_qr_relay", &config).unwrap();
    assert_eq!(outcome.verdict, Verdict::blocked("user_declined"));
}

#[test]
fn verdicts_are_rederivable_from_serialized_transcripts() {
    for name in scenario_names() {
        let outcome = run_default(name);
        let text = outcome.transcript.to_ndjson();
        let parsed = Transcript::parse_ndjson(&text).unwrap();
        assert_eq!(
            derive_verdict(&parsed).unwrap(),
            outcome.verdict,
            "scenario {name}"
        );
    }
}

#[test]
fn transcripts_pass_structural_validators() {
    for name in scenario_names() {
        let outcome = run_default(name);
        let t = &outcome.transcript;
        t.check_attribution().unwrap();
        t.check_capability_soundness().unwrap();
        t.check_secure_context().unwrap();
        t.check_origin_binding().unwrap();
    }
}

#[test]
fn identical_configs_produce_identical_transcripts() {
    for name in scenario_names() {
        let config = default_config(name).unwrap();
        let a = run_scenario(name, &config).unwrap().transcript.to_ndjson();
        let b = run_scenario(name, &config).unwrap().transcript.to_ndjson();
        assert_eq!(a, b, "scenario {name}");
    }
}

#[test]
fn table1_labels_attached_to_the_two_implemented_attacks() {
    let infected = run_default("infected_authenticator");
    let labels = infected.table1.expect("IE labels");
    assert_eq!(
        [
            labels.stealthiness,
            labels.feasibility,
            labels.victim_interaction,
            labels.time_consumption,
            labels.privileges
        ],
        ["High", "Medium", "Low", "Low", "Low-High"]
    );
    let deception = run_default("authenticator_deception");
    let labels = deception.table1.expect("AD labels");
    assert_eq!(
        [
            labels.stealthiness,
            labels.feasibility,
            labels.victim_interaction,
            labels.time_consumption,
            labels.privileges
        ],
        ["Medium", "High", "High", "Low-High", "Low-High"]
    );
    assert!(run_default("baseline").table1.is_none());
}

#[test]
fn scenario_config_module_path_reexports() {
    // The registry surface used by the CLI.
    let _ = scenario::scenario_names();
    let config = scenario::default_config("baseline").unwrap();
    assert_eq!(config.scenario, "baseline");
}
