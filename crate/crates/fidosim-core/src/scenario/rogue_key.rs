//! Rogue key registration. Variant (a) is a local AITM on the victim's CTAP
//! channel that swaps the public key while a passkey is being added, locking
//! the victim out of their own credential. Variant (b) phishes the password
//! first and then uses the legitimate add-passkey endpoint; the implanted
//! credential survives any later password change.

use alloc::string::{String, ToString};

use serde_json::json;

use crate::authenticator::infected_credential_id;
use crate::ceremony::{
    AuthenticatorData, ClientData, ClientDataType, FLAG_USER_PRESENT, FLAG_USER_VERIFIED,
};
use crate::client::{
    finish_auth_message, finish_reg_message, wire_str, AssertionSubmission, FlowError,
};
use crate::crypto::{derive_seeded_keypair, Seed};
use crate::fabric::{ChannelKind, InterceptorBehavior, InterceptorSelector};
use crate::scenario::{
    block_reason, build_world, finish, ScenarioConfig, ScenarioOutcome, ALICE, ALICE_PASSWORD,
    ATTACKER, EP_CTAP_VICTIM, PHISH_URL, RP_DOMAIN, RP_URL, VICTIM,
};
use crate::wire::{self, kind};
use crate::world::{FrontendMode, World};

pub(crate) fn run(config: &ScenarioConfig) -> ScenarioOutcome {
    let mut world = build_world(config, "rogue_key_registration");
    let result = script(&mut world, config);
    if let Err(error) = result {
        world.flow_blocked(ATTACKER, &error);
    }
    finish(world, "rogue_key_registration", None)
}

fn script(world: &mut World, config: &ScenarioConfig) -> Result<(), FlowError> {
    let password_phishable = config.toggles.password_fallback_enabled
        && config.victim_policy.follows_phishing_links
        && config.victim_policy.falls_back_to_password;
    if config.toggles.victim_compromised || !password_phishable {
        local_aitm_variant(world)
    } else {
        credential_phishing_variant(world)
    }
}

/// Variant (a): replace the public key in transit while the victim adds a
/// passkey to their own account.
fn local_aitm_variant(world: &mut World) -> Result<(), FlowError> {
    // The attacker's replacement key, derived from their own seed so a later
    // login needs nothing but the seed and the victim's credential id.
    let rogue_seed = Seed::attacker_known(world.rng.fork("rogue-key").bytes32());
    let rogue_keypair = derive_seeded_keypair(&rogue_seed, 0);
    let rogue_pk_hex = rogue_keypair.public.to_hex();
    world.attacker.derived_keypairs.push((
        0,
        rogue_keypair.clone(),
        infected_credential_id(&rogue_seed, 0),
    ));
    world.event(
        ATTACKER,
        "attacker.derived_keypair",
        json!({"index": 0, "public_key": rogue_pk_hex}),
    );

    let interceptor = world.register_interceptor(
        ATTACKER,
        InterceptorSelector {
            kind: ChannelKind::Ctap,
            client_host: Some(VICTIM.into()),
            endpoint: Some(EP_CTAP_VICTIM.into()),
        },
        InterceptorBehavior::ReplaceRegistrationKey {
            public_key_hex: rogue_pk_hex.clone(),
        },
    );
    let intercepted = interceptor.is_ok();
    if let Err(e) = interceptor {
        // No position on the device: record the failure, then watch the
        // registration proceed honestly out of reach.
        world.flow_blocked(ATTACKER, &FlowError::from(e));
    }

    // The victim, already signed in, adds a passkey to their account.
    let conn = world.client_navigate(VICTIM, RP_URL)?;
    let token = world
        .fixture_session(ALICE)
        .map_err(|e| FlowError::new(e.code()))?;
    let add = wire::message(
        kind::ADD_PASSKEY,
        &[("session_token", serde_json::Value::String(token.to_hex()))],
    );
    let response = world.send_on_channel(conn.channel, add)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }
    let ceremony_id = wire_str(&response, "ceremony_id")?;
    let challenge = wire_str(&response, "challenge")?;
    let rp_id = wire_str(&response, "rp_id")?;
    let user_handle = wire_str(&response, "user_handle")?;

    let submission =
        world.client_webauthn_create(VICTIM, &conn, &rp_id, &user_handle, &challenge)?;
    let finish_reg = finish_reg_message(&ceremony_id, &submission);
    let response = world.send_on_channel(conn.channel, finish_reg)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }

    if !intercepted {
        // Honest registration went through; the attacker never got a handle
        // on it. The earlier block reason stands.
        return Ok(());
    }

    // Consequence for the victim: their authenticator still holds the real
    // key, the RP holds the rogue one.
    let victim_login = world.flow_passkey_login(VICTIM, &conn, Some(ALICE));
    let victim_result: String = match &victim_login {
        Ok(_) => "ok".into(),
        Err(e) => e.code.clone(),
    };
    world.event(
        ATTACKER,
        "attack.note",
        json!({"victim_login_after_swap": victim_result}),
    );

    // Consequence for the attacker: the stored key is theirs, under the
    // victim's credential id.
    let (victim_credential_id, _original_pk) = world
        .attacker
        .replaced_credential
        .ok_or_else(|| FlowError::new("credential_not_captured"))?;
    let attacker_conn = world.client_navigate(ATTACKER, RP_URL)?;
    let begin = wire::message(kind::BEGIN_AUTH, &[]);
    let response = world.send_on_channel(attacker_conn.channel, begin)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }
    let ceremony_id = wire_str(&response, "ceremony_id")?;
    let challenge = wire_str(&response, "challenge")?;

    let client_data = ClientData {
        kind: ClientDataType::Get,
        challenge,
        origin: attacker_conn.origin_as_seen.clone(),
    };
    let authenticator_data =
        AuthenticatorData::new(RP_DOMAIN, FLAG_USER_PRESENT | FLAG_USER_VERIFIED, 1);
    let message = crate::ceremony::signed_message(&authenticator_data, &client_data.hash());
    let signature = rogue_keypair.sign(&message);
    let submission = AssertionSubmission {
        client_data,
        credential_id: victim_credential_id.to_hex(),
        user_handle: Some(ALICE.to_string()),
        authenticator_data: authenticator_data.to_hex(),
        signature: signature.to_hex(),
    };
    let finish_msg = finish_auth_message(&ceremony_id, &submission, ALICE);
    let response = world.send_on_channel(attacker_conn.channel, finish_msg)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }
    Ok(())
}

/// Variant (b): phish the password, log in as the victim, and register an
/// attacker-held passkey through the front door.
fn credential_phishing_variant(world: &mut World) -> Result<(), FlowError> {
    world.set_frontend_mode(FrontendMode::CredentialPhishing);
    if !world.consult_policy(VICTIM, "follows_phishing_links") {
        return Err(FlowError::new(block_reason::USER_DECLINED));
    }
    let phish_conn = world.client_navigate(VICTIM, PHISH_URL)?;
    let begin = wire::message(kind::BEGIN_AUTH, &[]);
    let _ = world.send_on_channel(phish_conn.channel, begin)?;
    world.client_submit_password(VICTIM, &phish_conn, ALICE, ALICE_PASSWORD)?;

    let (user, password) = world
        .attacker
        .captured_passwords
        .first()
        .cloned()
        .ok_or_else(|| FlowError::new("password_not_captured"))?;

    // Replay the stolen credentials against the genuine RP.
    let attacker_conn = world.client_navigate(ATTACKER, RP_URL)?;
    let login = wire::message(
        kind::PASSWORD_LOGIN,
        &[
            ("user_handle", serde_json::Value::String(user)),
            ("password", serde_json::Value::String(password)),
        ],
    );
    let response = world.send_on_channel(attacker_conn.channel, login)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }
    let token = wire_str(&response, "session_token")?;

    let add = wire::message(
        kind::ADD_PASSKEY,
        &[("session_token", serde_json::Value::String(token))],
    );
    let response = world.send_on_channel(attacker_conn.channel, add)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }
    let ceremony_id = wire_str(&response, "ceremony_id")?;
    let challenge = wire_str(&response, "challenge")?;
    let rp_id = wire_str(&response, "rp_id")?;
    let user_handle = wire_str(&response, "user_handle")?;

    // The passkey is minted on the attacker's own authenticator but lands on
    // the victim's account.
    let submission =
        world.client_webauthn_create(ATTACKER, &attacker_conn, &rp_id, &user_handle, &challenge)?;
    let finish_reg = finish_reg_message(&ceremony_id, &submission);
    let response = world.send_on_channel(attacker_conn.channel, finish_reg)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }

    // The victim rotates their password; the implanted passkey keeps working.
    world.fixture_set_password(VICTIM, ALICE, "rotated-after-incident");
    world.flow_passkey_login(ATTACKER, &attacker_conn, None)?;
    Ok(())
}
