//! Property tests for the core invariants: signature soundness under
//! corruption, origin immutability under message tampering, clone detection,
//! key binding and private-key confidentiality.

use proptest::prelude::*;

use fidosim_core::authenticator::{Authenticator, CtapRequest, CtapResponse};
use fidosim_core::ceremony::{AuthenticatorData, ClientData, ClientDataType};
use fidosim_core::crypto::{self, derive_seeded_keypair, generate_keypair, Seed};
use fidosim_core::fabric::{ChannelKind, InterceptorBehavior, InterceptorSelector};
use fidosim_core::rng::SimRng;
use fidosim_core::rp::{CredentialId, RelyingParty, RpConfig};
use fidosim_core::scenario::{build_world, default_config, run_scenario, scenario_names};

// -- crypto ---------------------------------------------------------------

proptest! {
    #[test]
    fn round_trip_verifies_for_any_message(seed in any::<u64>(), msg in proptest::collection::vec(any::<u8>(), 1..256)) {
        let mut rng = SimRng::from_seed(seed);
        let kp = generate_keypair(&mut rng);
        let sig = kp.sign(&msg);
        prop_assert!(crypto::verify(&kp.public, &msg, &sig));
    }

    #[test]
    fn corrupted_signatures_never_verify(
        seed in any::<u64>(),
        msg in proptest::collection::vec(any::<u8>(), 1..128),
        byte_index in 0usize..64,
        xor in 1u8..=255,
    ) {
        let mut rng = SimRng::from_seed(seed);
        let kp = generate_keypair(&mut rng);
        let mut sig = kp.sign(&msg);
        sig.bytes[byte_index] ^= xor;
        prop_assert!(!crypto::verify(&kp.public, &msg, &sig));
    }

    #[test]
    fn foreign_messages_never_verify(
        seed in any::<u64>(),
        msg in proptest::collection::vec(any::<u8>(), 1..128),
        other in proptest::collection::vec(any::<u8>(), 1..128),
    ) {
        prop_assume!(msg != other);
        let mut rng = SimRng::from_seed(seed);
        let kp = generate_keypair(&mut rng);
        let sig = kp.sign(&msg);
        prop_assert!(!crypto::verify(&kp.public, &other, &sig));
    }
}

/// Exhaustive single-bit-flip sweep over one signature: all 512 corrupted
/// variants must fail.
#[test]
fn every_single_bit_flip_breaks_the_signature() {
    let seed = Seed::attacker_known([0x5au8; 32]);
    let kp = derive_seeded_keypair(&seed, 0);
    let msg = b"bit flip sweep vector";
    let sig = kp.sign(msg);
    assert!(crypto::verify(&kp.public, msg, &sig));
    for bit in 0..512 {
        let mut corrupted = sig;
        corrupted.bytes[bit / 8] ^= 1 << (bit % 8);
        assert!(
            !crypto::verify(&kp.public, msg, &corrupted),
            "flip of bit {bit} still verified"
        );
    }
}

/// Golden derivation vector, frozen across releases: the all-zero seed at
/// index 0 must always yield this public key.
#[test]
fn seeded_derivation_golden_vector() {
    let kp = derive_seeded_keypair(&Seed::attacker_known([0u8; 32]), 0);
    assert_eq!(
        kp.public.to_hex(),
        "36dc5611bd7fceb76b8a6ce996ab8782699b1e2f9f599a7e0aeeb66ae31bb127"
    );
}

// -- clone detection ---------------------------------------------------------

/// Honest unclonability proxy: duplicate an authenticator's state and the RP
/// flags the stale copy on its first assertion.
#[test]
fn cloned_authenticator_is_flagged_within_one_assertion() {
    let mut rp = RelyingParty::new(RpConfig::new("linear.app", "https://linear.app"));
    rp.create_account("alice", None);
    let mut rng = SimRng::from_seed(11);
    let mut device = Authenticator::new_honest("1234");

    let reg = rp.begin_registration("alice", &mut rng, 0).unwrap();
    let reg_cd = ClientData::new(
        ClientDataType::Create,
        &reg.challenge.bytes,
        "https://linear.app",
    );
    device.unlock("1234").unwrap();
    let CtapResponse::MakeCredential {
        credential_id,
        public_key,
        authenticator_data,
        ..
    } = device
        .make_credential(
            &CtapRequest::MakeCredential {
                rp_id: "linear.app".into(),
                client_data_hash: reg_cd.hash(),
                user_handle: Some("alice".into()),
            },
            &mut rng,
        )
        .unwrap()
    else {
        panic!("wrong response")
    };
    rp.finish_registration(
        &reg.ceremony_id,
        &reg_cd,
        &fidosim_core::rp::RegistrationResponse {
            credential_id,
            public_key,
            authenticator_data,
        },
    )
    .unwrap();

    let assert_once = |rp: &mut RelyingParty,
                       device: &mut Authenticator,
                       rng: &mut SimRng|
     -> Result<_, fidosim_core::rp::RpError> {
        let auth = rp.begin_authentication(None, rng, 0);
        let cd = ClientData::new(
            ClientDataType::Get,
            &auth.challenge.bytes,
            "https://linear.app",
        );
        device.unlock("1234").unwrap();
        let CtapResponse::GetAssertion {
            credential_id,
            authenticator_data,
            signature,
            ..
        } = device
            .get_assertion(&CtapRequest::GetAssertion {
                rp_id: "linear.app".into(),
                client_data_hash: cd.hash(),
            })
            .unwrap()
        else {
            panic!("wrong response")
        };
        rp.finish_authentication(
            &auth.ceremony_id,
            &cd,
            &authenticator_data,
            &credential_id,
            "alice",
            &signature.bytes,
            rng,
            0,
        )
    };

    let mut stale_copy = device.clone();
    assert!(assert_once(&mut rp, &mut device, &mut rng).is_ok());
    assert_eq!(
        assert_once(&mut rp, &mut stale_copy, &mut rng).unwrap_err(),
        fidosim_core::rp::RpError::CloneSuspected
    );
}

proptest! {
    /// Randomized replay attempts with non-increasing counters are always
    /// CloneSuspected.
    #[test]
    fn non_increasing_counters_always_rejected(seed in any::<u64>(), stale_offset in 0u32..3) {
        let mut rp = RelyingParty::new(RpConfig::new("linear.app", "https://linear.app"));
        rp.create_account("alice", None);
        let mut rng = SimRng::from_seed(seed);
        let kp = generate_keypair(&mut rng);
        let credential_id = CredentialId(rng.bytes16());

        let reg = rp.begin_registration("alice", &mut rng, 0).unwrap();
        let reg_cd = ClientData::new(ClientDataType::Create, &reg.challenge.bytes, "https://linear.app");
        let ad = AuthenticatorData::new("linear.app", 0b101, 3);
        rp.finish_registration(&reg.ceremony_id, &reg_cd, &fidosim_core::rp::RegistrationResponse {
            credential_id,
            public_key: kp.public,
            authenticator_data: ad,
        }).unwrap();

        // Counter at or below the stored value (3): always rejected.
        let auth = rp.begin_authentication(None, &mut rng, 0);
        let cd = ClientData::new(ClientDataType::Get, &auth.challenge.bytes, "https://linear.app");
        let stale = AuthenticatorData::new("linear.app", 0b101, 3 - stale_offset.min(3));
        let msg = fidosim_core::ceremony::signed_message(&stale, &cd.hash());
        let sig = kp.sign(&msg);
        let outcome = rp.finish_authentication(
            &auth.ceremony_id, &cd, &stale, &credential_id, "alice", &sig.bytes, &mut rng, 0,
        );
        prop_assert_eq!(outcome.unwrap_err(), fidosim_core::rp::RpError::CloneSuspected);
    }
}

// -- interceptor fuzzing -------------------------------------------------------

proptest! {
    /// No fabric message tampering can move the client off its requested
    /// origin: `origin_as_seen` and every ClientData origin derive from the
    /// URL bar, not from anything on the wire.
    #[test]
    fn origin_as_seen_survives_message_tampering(
        field_choice in 0usize..6,
        value in "[a-z0-9.:/]{0,40}",
        kind_choice in 0usize..4,
        tamper_ctap in any::<bool>(),
    ) {
        let fields = ["origin", "challenge", "rp_id", "user_handle", "credential_id", "client_data_origin"];
        let kinds = ["rp.begin_auth.ok", "rp.begin_reg.ok", "ctap.get_assertion.ok", "ctap.make_credential.ok"];
        let mut config = default_config("baseline").unwrap();
        // Compromise grants the interceptor position on the victim's device.
        config.toggles.victim_compromised = true;
        let mut world = build_world(&config, "tamper_fuzz");

        let selector = if tamper_ctap {
            InterceptorSelector {
                kind: ChannelKind::Ctap,
                client_host: Some("victim".into()),
                endpoint: Some("ep-ctap-victim".into()),
            }
        } else {
            InterceptorSelector {
                kind: ChannelKind::Web,
                client_host: Some("victim".into()),
                endpoint: None,
            }
        };
        world
            .register_interceptor(
                "attacker",
                selector,
                InterceptorBehavior::TamperField {
                    msg_kind: kinds[kind_choice].into(),
                    field: fields[field_choice].into(),
                    value: serde_json::Value::String(value),
                },
            )
            .unwrap();

        // The ceremony may well fail under tampering; the invariant is about
        // what the client believed, not whether the RP accepted.
        let conn = world.client_navigate("victim", "https://linear.app").unwrap();
        prop_assert_eq!(conn.origin_as_seen.as_str(), "https://linear.app");
        let _ = world.flow_register("victim", &conn, "alice");
        let _ = world.flow_passkey_login("victim", &conn, Some("alice"));

        world.transcript.check_origin_binding().unwrap();
        world.transcript.check_secure_context().unwrap();
        for event in world.transcript.events() {
            if event.kind == "client.webauthn_create" || event.kind == "client.webauthn_get" {
                prop_assert_eq!(
                    event.payload.get("origin").and_then(|v| v.as_str()),
                    Some("https://linear.app")
                );
            }
        }
    }
}

// -- transcript-wide semantics ----------------------------------------------------

/// Key binding, replayed from transcripts: every session issued over a
/// passkey ceremony points at a credential that was registered for exactly
/// that user.
#[test]
fn sessions_bind_to_registered_credentials() {
    for name in scenario_names() {
        let outcome = run_scenario(name, &default_config(name).unwrap()).unwrap();
        let events = outcome.transcript.events();
        for auth in events
            .iter()
            .filter(|e| e.kind == "rp.finish_auth")
            .filter(|e| e.payload.get("result").and_then(|v| v.as_str()) == Some("ok"))
        {
            let user = auth.payload.get("user").and_then(|v| v.as_str()).unwrap();
            let credential_id = auth
                .payload
                .get("credential_id")
                .and_then(|v| v.as_str())
                .unwrap();
            let registered_to_user = events.iter().any(|e| {
                e.kind == "rp.finish_reg"
                    && e.payload.get("result").and_then(|v| v.as_str()) == Some("ok")
                    && e.payload.get("credential_id").and_then(|v| v.as_str())
                        == Some(credential_id)
                    && e.payload.get("user").and_then(|v| v.as_str()) == Some(user)
            });
            assert!(
                registered_to_user,
                "scenario {name}: session for {user} used unregistered credential {credential_id}"
            );
        }
    }
}

/// Private keys never appear in any transcript, in any encoding, for any
/// scenario, successful or blocked.
#[test]
fn no_private_material_in_any_default_transcript() {
    let keyed_scenarios = [
        "baseline",
        "infected_authenticator",
        "authenticator_deception",
        "rogue_key_registration",
        "bluetooth_qr_relay",
    ];
    for name in scenario_names() {
        let outcome = run_scenario(name, &default_config(name).unwrap()).unwrap();
        if keyed_scenarios.contains(name) {
            assert!(!outcome.keypair_audit.is_empty(), "scenario {name}");
        }
        outcome
            .transcript
            .scan_private_material(outcome.keypair_audit.iter())
            .unwrap();
    }
}

/// The reduction attack must capture the password and nothing passkey-shaped.
#[test]
fn reduction_capture_log_contains_no_passkey_material() {
    let config = default_config("passkey_reduction").unwrap();
    let mut world = build_world(&config, "passkey_reduction_probe");
    // Drive the same flow the scenario runs, but keep the world.
    world.set_frontend_mode(fidosim_core::world::FrontendMode::CredentialPhishing);
    let conn = world
        .client_navigate("victim", "https://evil.example")
        .unwrap();
    world
        .client_submit_password("victim", &conn, "alice", "correct-horse-9")
        .unwrap();
    let log = world.attacker.capture_log_json();
    assert!(log.contains("correct-horse-9"));
    for kp in world.audit_keypairs() {
        assert!(!kp.private_material_appears_in(&log));
    }
    assert!(!log.contains("authenticator_data"));
}

// -- phishing resistance (fast sample; the full 1000-run version is in the
// acceptance suite) ---------------------------------------------------------

#[test]
fn phishing_resistance_holds_on_a_quick_sample() {
    let mut sample_rng = SimRng::from_seed(2024);
    for _ in 0..25 {
        let seed = sample_rng.next_u64();
        for name in scenario_names() {
            let mut config = default_config(name).unwrap();
            config.seed = seed;
            config.toggles.victim_compromised = false;
            config.toggles.install_rogue_ca = false;
            config.toggles.proximity = false;
            config.toggles.password_fallback_enabled = false;
            config.toggles.anti_arp_spoofing = sample_rng.next_u64().is_multiple_of(2);
            config.victim_policy.follows_phishing_links = sample_rng.next_u64().is_multiple_of(2);
            config.victim_policy.ignores_tls_warnings = sample_rng.next_u64().is_multiple_of(2);
            config.victim_policy.falls_back_to_password = sample_rng.next_u64().is_multiple_of(2);
            let outcome = run_scenario(name, &config).unwrap();
            assert!(
                !outcome.verdict.is_account_takeover(),
                "scenario {name} took over an account without compromise: {}",
                outcome.verdict
            );
        }
    }
}

#[test]
fn webauthn_refuses_foreign_rp_id_at_phishing_origin() {
    // The core of phishing resistance: at the attacker's own origin, either
    // the client refuses a mismatched RP ID or the authenticator holds no
    // credential for that domain.
    let mut config = default_config("baseline").unwrap();
    config.victim_policy.follows_phishing_links = true;
    let mut world = build_world(&config, "rp_id_check");
    let conn = world
        .client_navigate("victim", "https://linear.app")
        .unwrap();
    world.flow_register("victim", &conn, "alice").unwrap();

    let phish = world
        .client_navigate("victim", "https://evil.example")
        .unwrap();
    // Phish asks for the genuine RP ID: browser refuses.
    let err = world
        .client_webauthn_get("victim", &phish, "linear.app", &"A".repeat(43))
        .unwrap_err();
    assert_eq!(err, fidosim_core::client::ClientError::RpIdMismatch);
    // Phish asks for its own RP ID: no credential exists for it.
    let err = world
        .client_webauthn_get("victim", &phish, "evil.example", &"A".repeat(43))
        .unwrap_err();
    assert_eq!(err, fidosim_core::client::ClientError::NoCredential);
}

#[test]
fn http_is_insecure_except_on_localhost() {
    let mut config = default_config("baseline").unwrap();
    config.victim_policy.ignores_tls_warnings = true;
    let mut world = build_world(&config, "secure_context_check");
    // Plain http to a public host: connection fine, secure context false.
    world.fabric.add_dns_record("plain.example", "10.0.9.9");
    world.fabric.add_route("10.0.9.9", "ep-phish");
    let conn = world
        .client_navigate("victim", "http://plain.example")
        .unwrap();
    assert!(!conn.secure_context);
    let err = world
        .client_webauthn_get("victim", &conn, "plain.example", &"A".repeat(43))
        .unwrap_err();
    assert_eq!(err, fidosim_core::client::ClientError::InsecureContext);

    // http://localhost is the one carve-out.
    world.fabric.add_dns_record("localhost", "127.0.0.1");
    world.fabric.add_route("127.0.0.1", "ep-ctap-victim");
    // Point localhost at a listening endpoint on the victim host itself.
    let conn = world.client_navigate("victim", "http://localhost");
    // The endpoint refuses web traffic (it is a CTAP endpoint), but the
    // secure-context rule is what we are probing; use the fabric directly.
    match conn {
        Ok(c) => assert!(c.secure_context),
        Err(_) => {
            // Fall back: secure-context logic is pure, check it via a web
            // endpoint on localhost.
            world.fabric.add_route("127.0.0.1", "ep-rp");
            let c = world.client_navigate("victim", "http://localhost").unwrap();
            assert!(c.secure_context);
        }
    }
}
